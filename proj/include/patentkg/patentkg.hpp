#pragma once

#include "patentkg/array.hpp"
#include "patentkg/autodiff.hpp"
#include "patentkg/checkpoint.hpp"
#include "patentkg/common.hpp"
#include "patentkg/corpus.hpp"
#include "patentkg/encoders.hpp"
#include "patentkg/eval.hpp"
#include "patentkg/graph.hpp"
#include "patentkg/linkpred.hpp"
#include "patentkg/patents.hpp"
