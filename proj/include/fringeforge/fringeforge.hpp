#pragma once

// Umbrella header.

#include "fringeforge/adam.hpp"
#include "fringeforge/autodiff.hpp"
#include "fringeforge/checkpoint.hpp"
#include "fringeforge/dataset.hpp"
#include "fringeforge/fft.hpp"
#include "fringeforge/io.hpp"
#include "fringeforge/model_io.hpp"
#include "fringeforge/nas.hpp"
#include "fringeforge/ops.hpp"
#include "fringeforge/phase.hpp"
#include "fringeforge/random.hpp"
#include "fringeforge/search.hpp"
#include "fringeforge/supernet.hpp"
#include "fringeforge/tensor.hpp"
#include "fringeforge/threading.hpp"
#include "fringeforge/training.hpp"
#include "fringeforge/unwrap.hpp"
