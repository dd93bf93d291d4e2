#pragma once

#include "rescam/class_lm.hpp"
#include "rescam/concept.hpp"
#include "rescam/evaluation.hpp"
#include "rescam/geometry.hpp"
#include "rescam/inventory.hpp"
#include "rescam/io.hpp"
#include "rescam/kernels.hpp"
#include "rescam/pipeline.hpp"
#include "rescam/scene.hpp"
#include "rescam/segmenter.hpp"
