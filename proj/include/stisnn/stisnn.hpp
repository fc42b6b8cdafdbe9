#pragma once

#include "stisnn/codec.hpp"
#include "stisnn/config.hpp"
#include "stisnn/cost_model.hpp"
#include "stisnn/dataflow.hpp"
#include "stisnn/error.hpp"
#include "stisnn/io.hpp"
#include "stisnn/layer.hpp"
#include "stisnn/line_buffer.hpp"
#include "stisnn/network.hpp"
#include "stisnn/neuron.hpp"
#include "stisnn/pipeline_sim.hpp"
#include "stisnn/spike.hpp"
#include "stisnn/weight_file.hpp"
