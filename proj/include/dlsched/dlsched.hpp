#pragma once

#include "errors.hpp"
#include "experiment.hpp"
#include "forwarding.hpp"
#include "io.hpp"
#include "lp/builders.hpp"
#include "lp/frames.hpp"
#include "lp/solver.hpp"
#include "net_model.hpp"
#include "oracle.hpp"
#include "packet.hpp"
#include "random.hpp"
#include "schedulers.hpp"
#include "sim_engine.hpp"
#include "traffic.hpp"
