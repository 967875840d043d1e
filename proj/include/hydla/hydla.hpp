#pragma once

// Umbrella header: the full interpreter, simulator, and checker stack.

#include <hydla/ast.hpp>
#include <hydla/checker.hpp>
#include <hydla/parser.hpp>
#include <hydla/polynomial.hpp>
#include <hydla/poset.hpp>
#include <hydla/rational.hpp>
#include <hydla/simulator.hpp>
#include <hydla/solver.hpp>
#include <hydla/timed_set.hpp>
#include <hydla/trace_io.hpp>
#include <hydla/trajectory.hpp>
