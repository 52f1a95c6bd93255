#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace strongnoise {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// A step produced a density matrix with an eigenvalue below -psd_tol.
/// Usually means dt is too large for the measurement strength.
class PsdViolation : public Error {
public:
    PsdViolation(double eigenvalue, std::size_t step)
        : Error("density matrix left the positive cone: smallest eigenvalue " +
                std::to_string(eigenvalue) + " at step " + std::to_string(step)),
          eigenvalue_(eigenvalue),
          step_(step) {}

    double eigenvalue() const noexcept { return eigenvalue_; }
    std::size_t step() const noexcept { return step_; }

private:
    double eigenvalue_;
    std::size_t step_;
};

class StepBudgetExceeded : public Error {
public:
    StepBudgetExceeded(std::size_t requested, std::size_t budget)
        : Error("requested " + std::to_string(requested) + " steps, budget is " +
                std::to_string(budget)),
          requested_(requested),
          budget_(budget) {}

    std::size_t requested() const noexcept { return requested_; }
    std::size_t budget() const noexcept { return budget_; }

private:
    std::size_t requested_;
    std::size_t budget_;
};

/// Root finder could not shrink its bracket to the requested width.
class ConvergenceFailure : public Error {
public:
    ConvergenceFailure(double lo, double hi)
        : Error("bracket [" + std::to_string(lo) + ", " + std::to_string(hi) +
                "] did not converge"),
          lo_(lo),
          hi_(hi) {}

    double lo() const noexcept { return lo_; }
    double hi() const noexcept { return hi_; }

private:
    double lo_;
    double hi_;
};

/// A Brownian path was too short to reach the requested real time.
class HorizonExhausted : public Error {
public:
    HorizonExhausted(double requested, double reached)
        : Error("horizon exhausted: requested real time " + std::to_string(requested) +
                ", path reaches " + std::to_string(reached)),
          requested_(requested),
          reached_(reached) {}

    double requested() const noexcept { return requested_; }
    double reached() const noexcept { return reached_; }

private:
    double requested_;
    double reached_;
};

/// Clock integral overflowed at a grid index (effective time step too coarse).
class ClockOverflow : public Error {
public:
    explicit ClockOverflow(std::size_t index)
        : Error("time change overflowed at grid index " + std::to_string(index)), index_(index) {}

    std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

}  // namespace strongnoise
