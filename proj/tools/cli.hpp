#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "closedlink/model.hpp"
#include "closedlink/state.hpp"

namespace closedlink::cli {

/// Runs one `mech` invocation (args exclude the program name). Returns the
/// exit code: 0 success, 1 domain error, 2 usage error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// State used by every subcommand: actuated positions as given (zeros when
/// empty), passive coordinates solved for closure from the joints' home
/// values, base upright and,
/// when the model has contacts, lowered until the lowest contact touches
/// z = 0. Actuated velocities (if given) are lifted to a closure-consistent
/// theta_dot.
GeneralizedState stance_state(const MechanismModel& model, const VecX& actuated, const VecX& actuated_velocity = {});

}  // namespace closedlink::cli
