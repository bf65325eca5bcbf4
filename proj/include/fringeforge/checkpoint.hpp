#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fringeforge/io.hpp"
#include "fringeforge/tensor.hpp"

namespace fringeforge {

inline constexpr const char* kCheckpointFormat = "FFCKPT/1";

/// Named tensor bundle with string metadata. On disk: a text manifest
/// (format line, meta lines, one tensor line with byte offset each), an `end`
/// line, then the QPT1-framed tensors back to back.
struct Checkpoint {
    std::map<std::string, std::string> meta;
    std::vector<std::pair<std::string, Tensor>> tensors;

    const Tensor* find(const std::string& name) const {
        for (const auto& [n, t] : tensors)
            if (n == name) return &t;
        return nullptr;
    }

    std::string meta_or(const std::string& key, const std::string& fallback) const {
        auto it = meta.find(key);
        return it == meta.end() ? fallback : it->second;
    }
};

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    // lay out the binary blob first so the manifest can carry offsets
    std::ostringstream blob(std::ios::binary);
    std::vector<std::uint64_t> offsets;
    offsets.reserve(ck.tensors.size());
    for (const auto& [name, t] : ck.tensors) {
        offsets.push_back(static_cast<std::uint64_t>(blob.tellp()));
        write_qpt(blob, t);
    }

    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << "format " << kCheckpointFormat << "\n";
    for (const auto& [k, v] : ck.meta) f << "meta " << k << " " << v << "\n";
    for (std::size_t i = 0; i < ck.tensors.size(); ++i)
        f << "tensor " << ck.tensors[i].first << " " << ck.tensors[i].second.shape().str() << " "
          << offsets[i] << "\n";
    f << "end\n";
    f << blob.str();
    if (!f.good()) throw std::runtime_error("write failed: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for reading: " + path);

    Checkpoint ck;
    std::string line;
    if (!std::getline(f, line)) throw std::runtime_error("checkpoint truncated: " + path);
    {
        std::istringstream ls(line);
        std::string tok, version;
        ls >> tok >> version;
        if (tok != "format" || version != kCheckpointFormat)
            throw std::runtime_error("checkpoint format mismatch: expected " +
                                     std::string(kCheckpointFormat) + ", found " +
                                     (version.empty() ? std::string("<none>") : version));
    }
    std::vector<std::string> names;
    while (std::getline(f, line)) {
        if (line == "end") break;
        std::istringstream ls(line);
        std::string tok;
        ls >> tok;
        if (tok == "meta") {
            std::string key;
            ls >> key;
            std::string value;
            std::getline(ls, value);
            if (!value.empty() && value.front() == ' ') value.erase(0, 1);
            ck.meta[key] = value;
        } else if (tok == "tensor") {
            std::string name;
            ls >> name;
            names.push_back(name);
        } else {
            throw std::runtime_error("checkpoint manifest: unknown directive '" + tok + "'");
        }
    }
    for (const std::string& name : names) ck.tensors.emplace_back(name, read_qpt(f));
    if (!f.good() && !f.eof()) throw std::runtime_error("checkpoint payload truncated: " + path);
    return ck;
}

}  // namespace fringeforge
