#pragma once

#include "uwqc/channel.hpp"
#include "uwqc/error.hpp"
#include "uwqc/field.hpp"
#include "uwqc/grid.hpp"
#include "uwqc/io.hpp"
#include "uwqc/polarization.hpp"
#include "uwqc/qkd.hpp"
#include "uwqc/rng.hpp"
#include "uwqc/screens.hpp"
#include "uwqc/shack_hartmann.hpp"
#include "uwqc/vortex.hpp"
#include "uwqc/zernike.hpp"
