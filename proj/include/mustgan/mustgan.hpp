#pragma once

#include "mustgan/config.hpp"
#include "mustgan/image_io.hpp"
#include "mustgan/metrics.hpp"
#include "mustgan/model.hpp"
#include "mustgan/training.hpp"
