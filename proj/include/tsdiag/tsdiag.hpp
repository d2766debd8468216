#pragma once

// Training-set diagnostics for binary classification: subclass detection with
// Gaussian mixtures, separation/noise/dispersion analysis, resampling
// treatments, a small classifier suite and the nonparametric comparison
// machinery that ties them together.

#include "tsdiag/classifiers.hpp"
#include "tsdiag/cli.hpp"
#include "tsdiag/common.hpp"
#include "tsdiag/dataset.hpp"
#include "tsdiag/diagnosis.hpp"
#include "tsdiag/gmm.hpp"
#include "tsdiag/io.hpp"
#include "tsdiag/metrics.hpp"
#include "tsdiag/neighbors.hpp"
#include "tsdiag/separation.hpp"
#include "tsdiag/special.hpp"
#include "tsdiag/stats.hpp"
#include "tsdiag/treatments.hpp"
