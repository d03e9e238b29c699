#pragma once

#include "nsgp/covariance.hpp"
#include "nsgp/dataset.hpp"
#include "nsgp/design.hpp"
#include "nsgp/error.hpp"
#include "nsgp/extremes.hpp"
#include "nsgp/geo.hpp"
#include "nsgp/io.hpp"
#include "nsgp/kdtree.hpp"
#include "nsgp/likelihood.hpp"
#include "nsgp/mcmc.hpp"
#include "nsgp/neighbors.hpp"
#include "nsgp/predict.hpp"
#include "nsgp/simulate.hpp"
