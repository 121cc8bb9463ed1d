#ifndef OATK_OATK_HPP
#define OATK_OATK_HPP

#include "oatk/calibration.hpp"
#include "oatk/core_linalg.hpp"
#include "oatk/errors.hpp"
#include "oatk/io.hpp"
#include "oatk/knockoff.hpp"
#include "oatk/parallel.hpp"
#include "oatk/pipeline.hpp"
#include "oatk/rng.hpp"
#include "oatk/selection.hpp"
#include "oatk/simulation.hpp"
#include "oatk/statistics.hpp"

#endif
