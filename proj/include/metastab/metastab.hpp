#pragma once

#include "metastab/chain.hpp"
#include "metastab/chain_io.hpp"
#include "metastab/error.hpp"
#include "metastab/experiment.hpp"
#include "metastab/harmonic.hpp"
#include "metastab/kolmogorov.hpp"
#include "metastab/linalg.hpp"
#include "metastab/meta.hpp"
#include "metastab/models/birth_death.hpp"
#include "metastab/models/two_site.hpp"
#include "metastab/models/zero_range.hpp"
#include "metastab/montecarlo.hpp"
#include "metastab/potential.hpp"
#include "metastab/random_chains.hpp"
#include "metastab/state_set.hpp"
#include "metastab/trace.hpp"
#include "metastab/trajectory.hpp"
#include "metastab/verify.hpp"
