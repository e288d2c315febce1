#pragma once

#include "hetrrm/baselines.hpp"
#include "hetrrm/channel.hpp"
#include "hetrrm/experiment.hpp"
#include "hetrrm/ids.hpp"
#include "hetrrm/netopt.hpp"
#include "hetrrm/oracle.hpp"
#include "hetrrm/phy.hpp"
#include "hetrrm/rng.hpp"
#include "hetrrm/rrm.hpp"
#include "hetrrm/scenario.hpp"
#include "hetrrm/topology.hpp"
#include "hetrrm/trace.hpp"
#include "hetrrm/utility.hpp"
