#pragma once

#include "error.hpp"
#include "quadrature.hpp"
#include "kernel.hpp"
#include "field.hpp"
#include "horizon.hpp"
#include "nlgrad.hpp"
#include "nullspace.hpp"
#include "geometry.hpp"
#include "energy.hpp"
#include "gamma.hpp"
#include "io.hpp"
