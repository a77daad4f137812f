#pragma once

#include "nrn/common.hpp"
#include "nrn/config.hpp"
#include "nrn/csv.hpp"
#include "nrn/eval.hpp"
#include "nrn/explain.hpp"
#include "nrn/logic.hpp"
#include "nrn/metrics.hpp"
#include "nrn/model.hpp"
#include "nrn/network.hpp"
#include "nrn/preprocess.hpp"
#include "nrn/trainer.hpp"
