#pragma once

// Everything except the command-line driver (cli.hpp), which needs CLI11.

#include "conformal_map.hpp"
#include "critical_finder.hpp"
#include "domain.hpp"
#include "errors.hpp"
#include "geometry.hpp"
#include "grid.hpp"
#include "harmonic.hpp"
#include "io.hpp"
#include "kirchhoff_routh.hpp"
#include "parallel.hpp"
#include "point_vortex.hpp"
#include "steady.hpp"
