#pragma once
#include "nvsim/markov.hpp"
