#pragma once

#include "momentlab/cascade.hpp"
#include "momentlab/curve_geometry.hpp"
#include "momentlab/experiments.hpp"
#include "momentlab/fourier.hpp"
#include "momentlab/freq_sets.hpp"
#include "momentlab/interval.hpp"
#include "momentlab/osc_quad.hpp"
#include "momentlab/parallel.hpp"
#include "momentlab/polynomial.hpp"
#include "momentlab/rational.hpp"
#include "momentlab/rng.hpp"

namespace momentlab {
inline constexpr const char* kVersion = "0.1.0";
}
