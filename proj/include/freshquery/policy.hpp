#pragma once

#include "freshquery/delay.hpp"

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace freshq {

/// Wait as a function of the perceived age d, for one observed state (or all of them).
class DelayWaitFn {
public:
    enum class Kind { Constant, Table, Threshold };

    struct Entry {
        double delay = 0.0;
        double wait = 0.0;
    };

    static DelayWaitFn constant(double wait);
    /// Step function over delay atoms: a delay d uses the entry with the largest
    /// atom <= d (the first entry below the smallest atom).
    static DelayWaitFn table(std::vector<Entry> entries);
    /// min{w_max, (gamma - d)^+}; gamma may be +inf.
    static DelayWaitFn threshold(double gamma, double w_max);

    Kind kind() const noexcept { return kind_; }
    double operator()(double d) const;
    std::span<const Entry> entries() const noexcept { return entries_; }
    double gamma() const noexcept { return gamma_; }
    /// Delays at which the function has a jump or a kink.
    std::vector<double> kinks() const;

    double max_wait() const;
    double min_wait() const;

private:
    Kind kind_ = Kind::Constant;
    double constant_ = 0.0;
    std::vector<Entry> entries_;
    double gamma_ = 0.0;
    double w_max_ = 0.0;
};

/// Stationary waiting policy W(i, d) in [0, w_max].
class WaitingPolicy {
public:
    enum class Form { ZeroWait, ConstantWait, StateIndependent, DelayIndependent, Full };

    static WaitingPolicy zero_wait();
    static WaitingPolicy constant(double wait, double w_max);
    static WaitingPolicy state_independent(DelayWaitFn fn, double w_max);
    static WaitingPolicy delay_independent(std::vector<double> waits, double w_max);
    static WaitingPolicy full(std::vector<DelayWaitFn> per_state, double w_max);

    Form form() const noexcept { return form_; }
    double w_max() const noexcept { return w_max_; }
    bool ignores_state() const noexcept;

    double wait(std::size_t state, double delay) const;
    /// The delay function used for `state`.
    const DelayWaitFn& for_state(std::size_t state) const;

    /// Human-readable rows: (state, delay_atom, wait) for Full, (delay_atom, wait)
    /// for StateIndependent, (state, wait) for DelayIndependent, scalar for ConstantWait.
    std::vector<std::string> table_rows() const;
    /// One-line compact form without commas, for CSV cells.
    std::string summary() const;

private:
    Form form_ = Form::ZeroWait;
    double w_max_ = 0.0;
    std::vector<DelayWaitFn> fns_;
};

std::string_view to_string(WaitingPolicy::Form form) noexcept;

}  // namespace freshq
