#pragma once

#include "c2flow/aggregate.hpp"
#include "c2flow/boosting.hpp"
#include "c2flow/common.hpp"
#include "c2flow/dataset.hpp"
#include "c2flow/ensemble.hpp"
#include "c2flow/evaluate.hpp"
#include "c2flow/features.hpp"
#include "c2flow/flow.hpp"
#include "c2flow/forest.hpp"
#include "c2flow/ip.hpp"
#include "c2flow/logistic.hpp"
#include "c2flow/metrics.hpp"
#include "c2flow/model.hpp"
#include "c2flow/pca.hpp"
#include "c2flow/synthgen.hpp"
#include "c2flow/tree.hpp"
#include "c2flow/triage.hpp"
