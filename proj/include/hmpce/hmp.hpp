#pragma once

#include "hmpce/hmp/builders.hpp"
#include "hmpce/hmp/engine.hpp"
#include "hmpce/hmp/exp_family.hpp"
#include "hmpce/hmp/factor_graph.hpp"
#include "hmpce/hmp/stretched.hpp"
