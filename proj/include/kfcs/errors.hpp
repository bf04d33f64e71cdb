#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace kfcs {

/// A precondition of an operation was violated by the caller.
class ContractViolation : public std::invalid_argument {
public:
    explicit ContractViolation(const std::string& what)
        : std::invalid_argument(what) {}
};

/// A quantity left its mathematical domain (e.g. a bound evaluated at
/// delta >= 1, or a probability outside (0,1)).
class DomainError : public std::domain_error {
public:
    explicit DomainError(const std::string& what)
        : std::domain_error(what) {}
};

/// A factorization or solve hit a (near-)singular matrix.
class SingularityError : public std::runtime_error {
public:
    SingularityError(const std::string& what, double lambda_min_estimate)
        : std::runtime_error(what), lambda_min_estimate(lambda_min_estimate) {}

    double lambda_min_estimate;
};

/// An iterative solver ran out of iterations or could not certify its
/// result. Carries the best iterate found and the residual gap.
class ConvergenceFailure : public std::runtime_error {
public:
    ConvergenceFailure(const std::string& what, std::vector<double> best_iterate,
                       double gap, long iterations)
        : std::runtime_error(what),
          best_iterate(std::move(best_iterate)),
          gap(gap),
          iterations(iterations) {}

    std::vector<double> best_iterate;
    double gap;
    long iterations;
};

/// An exhaustive enumeration would exceed its configured work budget.
/// Deliberately not recoverable by sampling: callers must shrink the
/// instance or raise the budget.
class BudgetExceeded : public std::runtime_error {
public:
    BudgetExceeded(const std::string& what, double cost_estimate, double budget)
        : std::runtime_error(what), cost_estimate(cost_estimate), budget(budget) {}

    double cost_estimate;
    double budget;
};

} // namespace kfcs
