#include "freshquery/policy.hpp"

#include "freshquery/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace freshq {

namespace {

constexpr double kBoundSlack = 1e-9;

double clamp_wait(double w, double w_max) {
    if (!(w >= -kBoundSlack) || w > w_max + kBoundSlack) {
        throw Error(ErrorCode::InvalidArgument,
                    "wait " + std::to_string(w) + " outside [0, " + std::to_string(w_max) + "]");
    }
    return std::clamp(w, 0.0, w_max);
}

std::string fmt_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

std::string fn_summary(const DelayWaitFn& fn) {
    switch (fn.kind()) {
        case DelayWaitFn::Kind::Constant:
            return fmt_num(fn(0.0));
        case DelayWaitFn::Kind::Threshold:
            return "threshold(" + (std::isinf(fn.gamma()) ? std::string("inf") : fmt_num(fn.gamma())) + ")";
        case DelayWaitFn::Kind::Table: {
            std::string s;
            for (const auto& e : fn.entries()) {
                if (!s.empty()) s += ' ';
                s += fmt_num(e.delay) + ":" + fmt_num(e.wait);
            }
            return "{" + s + "}";
        }
    }
    return {};
}

}  // namespace

DelayWaitFn DelayWaitFn::constant(double wait) {
    DelayWaitFn f;
    f.kind_ = Kind::Constant;
    f.constant_ = wait;
    return f;
}

DelayWaitFn DelayWaitFn::table(std::vector<Entry> entries) {
    if (entries.empty()) throw Error(ErrorCode::InvalidArgument, "empty wait table");
    std::sort(entries.begin(), entries.end(),
              [](const Entry& a, const Entry& b) { return a.delay < b.delay; });
    DelayWaitFn f;
    f.kind_ = Kind::Table;
    f.entries_ = std::move(entries);
    return f;
}

DelayWaitFn DelayWaitFn::threshold(double gamma, double w_max) {
    if (!(gamma >= 0.0)) throw Error(ErrorCode::InvalidArgument, "threshold must be >= 0");
    DelayWaitFn f;
    f.kind_ = Kind::Threshold;
    f.gamma_ = gamma;
    f.w_max_ = w_max;
    return f;
}

double DelayWaitFn::operator()(double d) const {
    switch (kind_) {
        case Kind::Constant:
            return constant_;
        case Kind::Threshold:
            if (std::isinf(gamma_)) return w_max_;
            return std::min(w_max_, std::max(0.0, gamma_ - d));
        case Kind::Table: {
            auto it = std::upper_bound(entries_.begin(), entries_.end(), d + kAtomMergeTolerance,
                                       [](double x, const Entry& e) { return x < e.delay; });
            if (it == entries_.begin()) return entries_.front().wait;
            return std::prev(it)->wait;
        }
    }
    return 0.0;
}

std::vector<double> DelayWaitFn::kinks() const {
    std::vector<double> out;
    if (kind_ == Kind::Table) {
        for (std::size_t k = 1; k < entries_.size(); ++k) out.push_back(entries_[k].delay);
    } else if (kind_ == Kind::Threshold && std::isfinite(gamma_)) {
        if (gamma_ - w_max_ > 0.0) out.push_back(gamma_ - w_max_);
        out.push_back(gamma_);
    }
    return out;
}

double DelayWaitFn::max_wait() const {
    switch (kind_) {
        case Kind::Constant: return constant_;
        case Kind::Threshold: return std::isinf(gamma_) ? w_max_ : std::min(w_max_, gamma_);
        case Kind::Table: {
            double m = 0.0;
            for (const auto& e : entries_) m = std::max(m, e.wait);
            return m;
        }
    }
    return 0.0;
}

double DelayWaitFn::min_wait() const {
    switch (kind_) {
        case Kind::Constant: return constant_;
        case Kind::Threshold: return std::isinf(gamma_) ? w_max_ : 0.0;
        case Kind::Table: {
            double m = kInfinity;
            for (const auto& e : entries_) m = std::min(m, e.wait);
            return m;
        }
    }
    return 0.0;
}

WaitingPolicy WaitingPolicy::zero_wait() {
    WaitingPolicy p;
    p.form_ = Form::ZeroWait;
    p.fns_ = {DelayWaitFn::constant(0.0)};
    return p;
}

WaitingPolicy WaitingPolicy::constant(double wait, double w_max) {
    WaitingPolicy p;
    p.form_ = Form::ConstantWait;
    p.w_max_ = w_max;
    p.fns_ = {DelayWaitFn::constant(clamp_wait(wait, w_max))};
    return p;
}

WaitingPolicy WaitingPolicy::state_independent(DelayWaitFn fn, double w_max) {
    WaitingPolicy p;
    p.form_ = Form::StateIndependent;
    p.w_max_ = w_max;
    if (fn.kind() == DelayWaitFn::Kind::Table) {
        std::vector<DelayWaitFn::Entry> entries(fn.entries().begin(), fn.entries().end());
        for (auto& e : entries) e.wait = clamp_wait(e.wait, w_max);
        fn = DelayWaitFn::table(std::move(entries));
    } else if (fn.kind() == DelayWaitFn::Kind::Constant) {
        fn = DelayWaitFn::constant(clamp_wait(fn(0.0), w_max));
    } else if (fn.max_wait() > w_max + kBoundSlack) {
        throw Error(ErrorCode::InvalidArgument, "threshold policy exceeds w_max");
    }
    p.fns_ = {std::move(fn)};
    return p;
}

WaitingPolicy WaitingPolicy::delay_independent(std::vector<double> waits, double w_max) {
    if (waits.empty()) throw Error(ErrorCode::InvalidArgument, "no per-state waits");
    WaitingPolicy p;
    p.form_ = Form::DelayIndependent;
    p.w_max_ = w_max;
    for (double w : waits) p.fns_.push_back(DelayWaitFn::constant(clamp_wait(w, w_max)));
    return p;
}

WaitingPolicy WaitingPolicy::full(std::vector<DelayWaitFn> per_state, double w_max) {
    if (per_state.empty()) throw Error(ErrorCode::InvalidArgument, "no per-state tables");
    WaitingPolicy p;
    p.form_ = Form::Full;
    p.w_max_ = w_max;
    for (auto& fn : per_state) {
        if (fn.kind() == DelayWaitFn::Kind::Table) {
            std::vector<DelayWaitFn::Entry> entries(fn.entries().begin(), fn.entries().end());
            for (auto& e : entries) e.wait = clamp_wait(e.wait, w_max);
            fn = DelayWaitFn::table(std::move(entries));
        } else if (fn.kind() == DelayWaitFn::Kind::Constant) {
            fn = DelayWaitFn::constant(clamp_wait(fn(0.0), w_max));
        }
    }
    p.fns_ = std::move(per_state);
    return p;
}

bool WaitingPolicy::ignores_state() const noexcept {
    return form_ == Form::ZeroWait || form_ == Form::ConstantWait ||
           form_ == Form::StateIndependent;
}

const DelayWaitFn& WaitingPolicy::for_state(std::size_t state) const {
    if (ignores_state()) return fns_.front();
    if (state >= fns_.size()) throw Error(ErrorCode::InvalidArgument, "policy has no such state");
    return fns_[state];
}

double WaitingPolicy::wait(std::size_t state, double delay) const {
    return for_state(state)(delay);
}

std::vector<std::string> WaitingPolicy::table_rows() const {
    std::vector<std::string> rows;
    auto delay_rows = [&](const DelayWaitFn& fn, const std::string& prefix) {
        if (fn.kind() == DelayWaitFn::Kind::Table) {
            for (const auto& e : fn.entries()) {
                rows.push_back(prefix + fmt_num(e.delay) + "," + fmt_num(e.wait));
            }
        } else {
            rows.push_back(prefix + "*," + fn_summary(fn));
        }
    };
    switch (form_) {
        case Form::ZeroWait:
        case Form::ConstantWait:
            rows.push_back(fmt_num(fns_.front()(0.0)));
            break;
        case Form::StateIndependent:
            delay_rows(fns_.front(), "");
            break;
        case Form::DelayIndependent:
            for (std::size_t i = 0; i < fns_.size(); ++i) {
                rows.push_back(std::to_string(i + 1) + "," + fmt_num(fns_[i](0.0)));
            }
            break;
        case Form::Full:
            for (std::size_t i = 0; i < fns_.size(); ++i) {
                delay_rows(fns_[i], std::to_string(i + 1) + ",");
            }
            break;
    }
    return rows;
}

std::string WaitingPolicy::summary() const {
    switch (form_) {
        case Form::ZeroWait:
            return "W=0";
        case Form::ConstantWait:
            return "W=" + fmt_num(fns_.front()(0.0));
        case Form::StateIndependent:
            return "W(d)=" + fn_summary(fns_.front());
        case Form::DelayIndependent: {
            std::string s;
            for (std::size_t i = 0; i < fns_.size(); ++i) {
                if (i) s += ' ';
                s += "W" + std::to_string(i + 1) + "=" + fmt_num(fns_[i](0.0));
            }
            return s;
        }
        case Form::Full: {
            std::string s;
            for (std::size_t i = 0; i < fns_.size(); ++i) {
                if (i) s += ' ';
                s += "W" + std::to_string(i + 1) + "(d)=" + fn_summary(fns_[i]);
            }
            return s;
        }
    }
    return {};
}

std::string_view to_string(WaitingPolicy::Form form) noexcept {
    switch (form) {
        case WaitingPolicy::Form::ZeroWait: return "zero_wait";
        case WaitingPolicy::Form::ConstantWait: return "constant_wait";
        case WaitingPolicy::Form::StateIndependent: return "state_independent";
        case WaitingPolicy::Form::DelayIndependent: return "delay_independent";
        case WaitingPolicy::Form::Full: return "full";
    }
    return "unknown";
}

}  // namespace freshq
