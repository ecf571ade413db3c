#pragma once

#include "subsparse/basis.hpp"
#include "subsparse/graph.hpp"
#include "subsparse/resapx.hpp"
#include "subsparse/resistance.hpp"
#include "subsparse/rng.hpp"
#include "subsparse/sketch.hpp"
#include "subsparse/solver.hpp"
#include "subsparse/spanning_tree.hpp"
#include "subsparse/sparsify.hpp"
#include "subsparse/testkit.hpp"
