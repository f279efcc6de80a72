#pragma once

#include "insdet/annotations.hpp"
#include "insdet/dataset.hpp"
#include "insdet/error.hpp"
#include "insdet/eval.hpp"
#include "insdet/feature_file.hpp"
#include "insdet/geometry.hpp"
#include "insdet/image.hpp"
#include "insdet/matching.hpp"
#include "insdet/parallel.hpp"
#include "insdet/records.hpp"
#include "insdet/pipeline.hpp"
#include "insdet/report.hpp"
#include "insdet/rng.hpp"
#include "insdet/synth.hpp"

#define INSDET_VERSION "0.1.0"
