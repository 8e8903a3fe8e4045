#pragma once

#include <vector>

#include "dipper/nuts.hpp"

namespace dipper {

/// Rank-normalized split R-hat: the larger of the bulk and folded (tail)
/// versions. NaN when the draws are constant or non-finite.
double split_rhat(const std::vector<std::vector<double>>& chains);

/// Bulk effective sample size of rank-normalized split chains, using
/// Geyer's initial positive sequence with the monotone correction.
double ess_bulk(const std::vector<std::vector<double>>& chains);

/// Classic (non-rank-normalized) split R-hat, used internally and exposed for
/// comparison.
double split_rhat_basic(const std::vector<std::vector<double>>& chains);
double ess_basic(const std::vector<std::vector<double>>& chains);

DiagnosticSeries split_rhat(const DrawArray& draws);
DiagnosticSeries ess_bulk(const DrawArray& draws);

}  // namespace dipper
