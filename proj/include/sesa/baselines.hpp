#pragma once

#include "sesa/dataset.hpp"

namespace sesa {

/// Missing cells get the observed column mean.
Imputed mean_impute(const Dataset& ds);

/// Missing cells get the observed column median: midpoint of the two middle
/// values for continuous columns, the lower middle value for ordinal ones.
Imputed median_impute(const Dataset& ds);

/// k-nearest-neighbour imputation. Distances use min-max normalized values
/// over the columns both rows observe, scaled by sqrt(d / shared); rows that
/// share no observed column are ineligible. Each missing cell gets the plain
/// mean of the k nearest rows observing that column (ties by row index),
/// falling back to the column mean when no row qualifies.
Imputed knn_impute(const Dataset& ds, int k = 5);

}  // namespace sesa
