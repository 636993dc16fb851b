#pragma once

#include "rmtlab/oracle.hpp"

namespace oracle = rmtlab::oracle;
