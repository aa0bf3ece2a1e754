#ifndef MSN_HPP
#define MSN_HPP

#include "msn/errors.hpp"
#include "msn/vecmath.hpp"
#include "msn/network.hpp"
#include "msn/objectives.hpp"
#include "msn/msn.hpp"
#include "msn/baselines.hpp"
#include "msn/data.hpp"
#include "msn/harness.hpp"

#endif  // MSN_HPP
