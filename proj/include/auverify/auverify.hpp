#pragma once

#include "auverify/au.hpp"
#include "auverify/errors.hpp"
#include "auverify/forward.hpp"
#include "auverify/geometry.hpp"
#include "auverify/heatmap.hpp"
#include "auverify/image_io.hpp"
#include "auverify/kernels.hpp"
#include "auverify/lrp.hpp"
#include "auverify/lrp_rules.hpp"
#include "auverify/metrics.hpp"
#include "auverify/model.hpp"
#include "auverify/model_io.hpp"
#include "auverify/pipeline.hpp"
#include "auverify/report.hpp"
#include "auverify/tensor.hpp"
