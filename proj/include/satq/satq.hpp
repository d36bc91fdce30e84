#pragma once

#include "satq/error.hpp"
#include "satq/dense.hpp"
#include "satq/rng.hpp"
#include "satq/parallel.hpp"
#include "satq/quantizer.hpp"
#include "satq/preprocess.hpp"
#include "satq/simplex.hpp"
#include "satq/linf.hpp"
#include "satq/pipeline.hpp"
#include "satq/analysis.hpp"
