#pragma once

#include "kmemir/baseline.hpp"
#include "kmemir/data.hpp"
#include "kmemir/error.hpp"
#include "kmemir/eval.hpp"
#include "kmemir/first_stage.hpp"
#include "kmemir/kernels.hpp"
#include "kmemir/krr.hpp"
#include "kmemir/parallel.hpp"
#include "kmemir/random.hpp"
#include "kmemir/stacking.hpp"
