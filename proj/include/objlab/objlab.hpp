#pragma once

#include "objlab/probcore.hpp"
#include "objlab/report.hpp"
#include "objlab/objectives.hpp"
#include "objlab/relations.hpp"
#include "objlab/empowerment.hpp"
#include "objlab/mixturefit.hpp"
#include "objlab/testbeds.hpp"
#include "objlab/sampling.hpp"
#include "objlab/suite.hpp"
