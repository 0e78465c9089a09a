#include "support/exact_chains.hpp"
