#pragma once

#include "gbm/averaging.hpp"
#include "gbm/berwald.hpp"
#include "gbm/chain.hpp"
#include "gbm/errors.hpp"
#include "gbm/expression.hpp"
#include "gbm/metric.hpp"
#include "gbm/metric_spec.hpp"
#include "gbm/quadrature.hpp"
#include "gbm/torsion.hpp"
#include "gbm/torsion_tensor.hpp"
