#pragma once

#include "dgbo/errors.hpp"
#include "dgbo/grid.hpp"
#include "dgbo/fft.hpp"
#include "dgbo/spectral.hpp"
#include "dgbo/dynamics.hpp"
#include "dgbo/ground_state.hpp"
#include "dgbo/linearized.hpp"
#include "dgbo/modulation.hpp"
#include "dgbo/monotonicity.hpp"
#include "dgbo/io.hpp"
#include "dgbo/experiment.hpp"
