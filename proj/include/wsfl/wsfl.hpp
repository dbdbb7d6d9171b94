#pragma once

#include "wsfl/autodiff.hpp"
#include "wsfl/dataset.hpp"
#include "wsfl/eval.hpp"
#include "wsfl/models.hpp"
#include "wsfl/pipeline.hpp"
#include "wsfl/preprocess.hpp"
#include "wsfl/pseudolabel.hpp"
#include "wsfl/saliency.hpp"
#include "wsfl/tensor.hpp"
