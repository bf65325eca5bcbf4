#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <stdexcept>
#include <vector>

#include "fringeforge/phase.hpp"

namespace fringeforge {

/// Residue charges on the (H-1)x(W-1) plaquette lattice, values in {-1,0,+1}.
struct ResidueMap {
    std::int64_t h = 0, w = 0;  // plaquette lattice extents
    std::vector<int> charges;

    ResidueMap() = default;
    ResidueMap(std::int64_t hh, std::int64_t ww) : h(hh), w(ww), charges(static_cast<std::size_t>(hh * ww), 0) {}

    int& at(std::int64_t y, std::int64_t x) { return charges[static_cast<std::size_t>(y * w + x)]; }
    int at(std::int64_t y, std::int64_t x) const { return charges[static_cast<std::size_t>(y * w + x)]; }
};

/// Blocked pixel edges. block_h(y,x) bars the step (y,x)->(y,x+1);
/// block_v(y,x) bars the step (y,x)->(y+1,x).
struct CutMask {
    std::int64_t h = 0, w = 0;  // pixel extents
    std::vector<char> horiz;    // H x (W-1)
    std::vector<char> vert;     // (H-1) x W

    CutMask() = default;
    CutMask(std::int64_t hh, std::int64_t ww)
        : h(hh),
          w(ww),
          horiz(static_cast<std::size_t>(hh * (ww - 1)), 0),
          vert(static_cast<std::size_t>((hh - 1) * ww), 0) {}

    char& block_h(std::int64_t y, std::int64_t x) { return horiz[static_cast<std::size_t>(y * (w - 1) + x)]; }
    bool block_h(std::int64_t y, std::int64_t x) const {
        return horiz[static_cast<std::size_t>(y * (w - 1) + x)] != 0;
    }
    char& block_v(std::int64_t y, std::int64_t x) { return vert[static_cast<std::size_t>(y * w + x)]; }
    bool block_v(std::int64_t y, std::int64_t x) const { return vert[static_cast<std::size_t>(y * w + x)] != 0; }

    std::int64_t count() const {
        std::int64_t n = 0;
        for (char c : horiz) n += c != 0;
        for (char c : vert) n += c != 0;
        return n;
    }
};

/// Loop-sum residue detection: the wrapped circulation around each 2x2
/// plaquette is a multiple of 2*pi; its winding is the charge.
inline ResidueMap detect_residues(const PhaseMap& wp) {
    if (!wp.wrapped) throw std::invalid_argument("detect_residues: input must be wrapped");
    const Grid& g = wp.grid;
    ResidueMap res(g.h - 1, g.w - 1);
    for (std::int64_t y = 0; y < g.h - 1; ++y) {
        for (std::int64_t x = 0; x < g.w - 1; ++x) {
            const double s = wrap_angle(g.at(y, x + 1) - g.at(y, x)) +
                             wrap_angle(g.at(y + 1, x + 1) - g.at(y, x + 1)) +
                             wrap_angle(g.at(y + 1, x) - g.at(y + 1, x + 1)) +
                             wrap_angle(g.at(y, x) - g.at(y + 1, x));
            res.at(y, x) = static_cast<int>(std::lround(s / two_pi));
        }
    }
    return res;
}

namespace detail {

// Residues live on the corner lattice between pixels; corner (r,c) touches
// pixels (r,c), (r,c+1), (r+1,c), (r+1,c+1).
struct Residue {
    std::int64_t r, c;
    int charge;
};

/// Block the pixel edge crossed by one dual step between adjacent corners.
inline void block_dual_step(CutMask& cuts, std::int64_t r, std::int64_t c, std::int64_t dr, std::int64_t dc) {
    if (dc == 1) cuts.block_v(r, c + 1) = 1;        // step right
    else if (dc == -1) cuts.block_v(r, c) = 1;      // step left
    else if (dr == 1) cuts.block_h(r + 1, c) = 1;   // step down
    else cuts.block_h(r, c) = 1;                    // step up
}

/// Straight dual walk of n steps in one direction, blocking crossed edges.
inline void walk(CutMask& cuts, std::int64_t& r, std::int64_t& c, std::int64_t dr, std::int64_t dc,
                 std::int64_t n) {
    for (std::int64_t i = 0; i < n; ++i) {
        block_dual_step(cuts, r, c, dr, dc);
        r += dr;
        c += dc;
    }
}

/// L-shaped cut between two corners: rows first, then columns.
inline void cut_between(CutMask& cuts, std::int64_t r1, std::int64_t c1, std::int64_t r2, std::int64_t c2) {
    std::int64_t r = r1, c = c1;
    walk(cuts, r, c, (r2 > r1) ? 1 : -1, 0, std::abs(r2 - r1));
    walk(cuts, r, c, 0, (c2 > c1) ? 1 : -1, std::abs(c2 - c1));
}

/// Cut from a corner to the nearest border (ties: up, left, down, right).
inline void cut_to_border(CutMask& cuts, std::int64_t r, std::int64_t c) {
    const std::int64_t up = r + 1, left = c + 1;
    const std::int64_t down = cuts.h - 1 - r, right = cuts.w - 1 - c;
    const std::int64_t best = std::min({up, left, down, right});
    std::int64_t rr = r, cc = c;
    if (best == up) walk(cuts, rr, cc, -1, 0, up);
    else if (best == left) walk(cuts, rr, cc, 0, -1, left);
    else if (best == down) walk(cuts, rr, cc, 1, 0, down);
    else walk(cuts, rr, cc, 0, 1, right);
}

}  // namespace detail

/// Goldstein-style branch cut placement: every residue is paired with the
/// nearest unbalanced opposite charge inside a growing search box, or grounded
/// to the border when that is closer. Ties resolve by lowest (row, col).
inline CutMask goldstein_branch_cuts(const ResidueMap& res) {
    CutMask cuts(res.h + 1, res.w + 1);
    std::vector<detail::Residue> rs;
    for (std::int64_t y = 0; y < res.h; ++y)
        for (std::int64_t x = 0; x < res.w; ++x)
            if (res.at(y, x) != 0) rs.push_back({y, x, res.at(y, x)});
    if (rs.empty()) return cuts;

    std::vector<char> balanced(rs.size(), 0);
    const std::int64_t max_radius = std::max(res.h, res.w) + 2;
    for (std::size_t i = 0; i < rs.size(); ++i) {
        if (balanced[i]) continue;
        const std::int64_t border_dist = std::min({rs[i].r + 1, rs[i].c + 1, cuts.h - 1 - rs[i].r,
                                                   cuts.w - 1 - rs[i].c});
        for (std::int64_t radius = 1; radius <= max_radius; ++radius) {
            // Nearest unbalanced opposite charge inside the box. rs is in
            // (row, col) order, so keeping the first hit at minimal distance
            // is the lowest-(row,col) tie-break.
            std::int64_t best_j = -1, best_d = radius + 1;
            for (std::size_t j = 0; j < rs.size(); ++j) {
                if (j == i || balanced[j] || rs[j].charge != -rs[i].charge) continue;
                const std::int64_t d = std::max(std::abs(rs[j].r - rs[i].r), std::abs(rs[j].c - rs[i].c));
                if (d > radius || d >= best_d) continue;
                best_d = d;
                best_j = static_cast<std::int64_t>(j);
            }
            if (best_j >= 0 && best_d <= border_dist) {
                detail::cut_between(cuts, rs[i].r, rs[i].c, rs[static_cast<std::size_t>(best_j)].r,
                                    rs[static_cast<std::size_t>(best_j)].c);
                balanced[i] = balanced[static_cast<std::size_t>(best_j)] = 1;
                break;
            }
            if (border_dist <= radius) {
                detail::cut_to_border(cuts, rs[i].r, rs[i].c);
                balanced[i] = 1;
                break;
            }
        }
    }
    return cuts;
}

/// Flood-fill integration of wrapped differences from a center seed, never
/// crossing cut edges; pixels the cuts enclose are extended afterwards from
/// their nearest reached neighbor.
inline PhaseMap unwrap(const PhaseMap& wp, const CutMask& cuts) {
    if (!wp.wrapped) throw std::invalid_argument("unwrap: input must be wrapped");
    const Grid& g = wp.grid;
    if (cuts.h != g.h || cuts.w != g.w) throw std::invalid_argument("unwrap: cut mask size mismatch");

    PhaseMap out{Grid(g.h, g.w), false};
    std::vector<char> visited(g.size(), 0);
    std::deque<std::int64_t> queue;

    const std::int64_t seed = (g.h / 2) * g.w + (g.w / 2);
    out.grid.v[static_cast<std::size_t>(seed)] = g.v[static_cast<std::size_t>(seed)];
    visited[static_cast<std::size_t>(seed)] = 1;
    queue.push_back(seed);

    auto relax = [&](std::int64_t from, std::int64_t to) {
        if (visited[static_cast<std::size_t>(to)]) return;
        out.grid.v[static_cast<std::size_t>(to)] =
            out.grid.v[static_cast<std::size_t>(from)] +
            wrap_angle(g.v[static_cast<std::size_t>(to)] - g.v[static_cast<std::size_t>(from)]);
        visited[static_cast<std::size_t>(to)] = 1;
        queue.push_back(to);
    };

    auto sweep = [&](bool respect_cuts) {
        while (!queue.empty()) {
            const std::int64_t p = queue.front();
            queue.pop_front();
            const std::int64_t y = p / g.w, x = p % g.w;
            if (x + 1 < g.w && (!respect_cuts || !cuts.block_h(y, x))) relax(p, p + 1);
            if (x > 0 && (!respect_cuts || !cuts.block_h(y, x - 1))) relax(p, p - 1);
            if (y + 1 < g.h && (!respect_cuts || !cuts.block_v(y, x))) relax(p, p + g.w);
            if (y > 0 && (!respect_cuts || !cuts.block_v(y - 1, x))) relax(p, p - g.w);
        }
    };
    sweep(true);

    // Cut-enclosed leftovers: extend across cuts from the reached region.
    bool any_left = false;
    for (std::size_t i = 0; i < visited.size(); ++i)
        if (!visited[i]) {
            any_left = true;
            break;
        }
    if (any_left) {
        for (std::int64_t p = 0; p < static_cast<std::int64_t>(g.size()); ++p)
            if (visited[static_cast<std::size_t>(p)]) queue.push_back(p);
        sweep(false);
    }
    return out;
}

}  // namespace fringeforge
