#pragma once

#include "orbitlift/embeddings.hpp"
#include "orbitlift/error.hpp"
#include "orbitlift/graph.hpp"
#include "orbitlift/isomorphism.hpp"
#include "orbitlift/learning.hpp"
#include "orbitlift/lifting.hpp"
#include "orbitlift/linalg.hpp"
#include "orbitlift/mechanisms.hpp"
#include "orbitlift/refinement.hpp"
#include "orbitlift/rng.hpp"
#include "orbitlift/scm.hpp"
#include "orbitlift/scm_checks.hpp"
#include "orbitlift/stats.hpp"
#include "orbitlift/symmetry.hpp"
#include "orbitlift/tasks/covariance.hpp"
#include "orbitlift/tasks/experiments.hpp"
#include "orbitlift/tasks/family.hpp"
#include "orbitlift/tasks/interactions.hpp"
#include "orbitlift/tasks/similarity.hpp"
#include "orbitlift/tasks/synthetic.hpp"
