#pragma once

#include "flip/corpus.hpp"
#include "flip/dataset.hpp"
#include "flip/eval.hpp"
#include "flip/inference.hpp"
#include "flip/model.hpp"
#include "flip/synth.hpp"
#include "flip/tensor_io.hpp"
#include "flip/trainer.hpp"
