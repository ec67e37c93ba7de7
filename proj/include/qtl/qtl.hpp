#pragma once

#include "qtl/common.hpp"
#include "qtl/rng.hpp"
#include "qtl/spectra.hpp"
#include "qtl/linalg.hpp"
#include "qtl/tilted_loss.hpp"
#include "qtl/statevector.hpp"
#include "qtl/estimators.hpp"
#include "qtl/optimizer.hpp"
#include "qtl/projector_benchmark.hpp"
#include "qtl/experiment.hpp"
#include "qtl/verify.hpp"
