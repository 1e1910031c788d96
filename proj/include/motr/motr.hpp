#pragma once

#include "motr/checkpoint.hpp"
#include "motr/clip.hpp"
#include "motr/config.hpp"
#include "motr/dataset_io.hpp"
#include "motr/evaluation.hpp"
#include "motr/experiment.hpp"
#include "motr/geometry.hpp"
#include "motr/grad_check.hpp"
#include "motr/grad_suite.hpp"
#include "motr/hungarian.hpp"
#include "motr/layers.hpp"
#include "motr/losses.hpp"
#include "motr/matching.hpp"
#include "motr/model.hpp"
#include "motr/mot_format.hpp"
#include "motr/ops.hpp"
#include "motr/optim.hpp"
#include "motr/qim.hpp"
#include "motr/simulator.hpp"
#include "motr/tensor.hpp"
#include "motr/tracker.hpp"
#include "motr/training.hpp"
