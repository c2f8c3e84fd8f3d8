#pragma once

#include "imchaos/bessel.hpp"
#include "imchaos/chaos.hpp"
#include "imchaos/error.hpp"
#include "imchaos/grid.hpp"
#include "imchaos/kernels.hpp"
#include "imchaos/mc.hpp"
#include "imchaos/phase.hpp"
#include "imchaos/quadrature.hpp"
#include "imchaos/rng.hpp"
#include "imchaos/sampler.hpp"
#include "imchaos/stats.hpp"
