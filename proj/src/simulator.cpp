#include "freshquery/simulator.hpp"

#include "freshquery/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace freshq {

namespace {

std::string fmt9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

// Jump structure of the chain: exit rate and cumulative jump probabilities per state.
class JumpSampler {
public:
    explicit JumpSampler(const GeneratorMatrix& g) {
        const Matrix& q = g.rates();
        const auto n = q.rows();
        exit_.resize(static_cast<std::size_t>(n));
        cumulative_.resize(static_cast<std::size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i) {
            const double rate = -q(i, i);
            exit_[static_cast<std::size_t>(i)] = rate;
            auto& c = cumulative_[static_cast<std::size_t>(i)];
            double acc = 0.0;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (j != i) acc += q(i, j) / rate;
                c.push_back(acc);
            }
        }
    }

    double exit_rate(std::size_t i) const { return exit_[i]; }

    std::size_t next(std::size_t i, std::mt19937_64& rng) const {
        const auto& c = cumulative_[i];
        const double u = std::uniform_real_distribution<double>(0.0, c.back())(rng);
        // The zero-width step at i itself can never be the first entry above u.
        const auto it = std::upper_bound(c.begin(), c.end(), u);
        return static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - c.begin(),
                                                                 static_cast<std::ptrdiff_t>(c.size()) - 1));
    }

private:
    std::vector<double> exit_;
    std::vector<std::vector<double>> cumulative_;
};

// Advances the path over [from, to] in the coordinates of `estimate`, returning the
// fresh time against it.
PathOutcome advance(const JumpSampler& jumps, std::size_t state,
                    std::span<const EstimatePiece> estimate, double from, double to,
                    std::mt19937_64& rng) {
    PathOutcome out{0.0, state};
    double t = from;
    std::size_t piece = 0;
    while (t < to) {
        const double hold = std::exponential_distribution<double>(jumps.exit_rate(out.end_state))(rng);
        const double stop = std::min(to, t + hold);
        while (piece + 1 < estimate.size() && estimate[piece + 1].start <= t) ++piece;
        double cursor = t;
        for (std::size_t k = piece; cursor < stop; ++k) {
            const double piece_end = k + 1 < estimate.size() ? estimate[k + 1].start : to;
            const double seg_end = std::min(stop, piece_end);
            if (estimate[k].state == out.end_state) out.fresh_time += seg_end - cursor;
            cursor = seg_end;
        }
        t = stop;
        if (t < to) out.end_state = jumps.next(out.end_state, rng);
    }
    return out;
}

}  // namespace

std::string SimResult::csv_header(std::size_t states) {
    std::string h = "mbf,stderr,mean_cycle";
    for (std::size_t i = 1; i <= states; ++i) h += ",phi_" + std::to_string(i);
    return h + ",seed,cycles";
}

std::string SimResult::csv_row() const {
    std::string r = fmt9(mbf_hat) + "," + fmt9(stderr_mbf) + "," + fmt9(mean_cycle);
    for (Eigen::Index i = 0; i < phi_hat.size(); ++i) r += "," + fmt9(phi_hat(i));
    return r + "," + std::to_string(seed) + "," + std::to_string(cycles);
}

PathOutcome jump_path_fresh_time(const GeneratorMatrix& g, std::size_t start_state,
                                 std::span<const EstimatePiece> estimate, double span,
                                 std::mt19937_64& rng) {
    if (estimate.empty() || estimate.front().start > 0.0) {
        throw Error(ErrorCode::InvalidArgument, "estimate trajectory must start at 0");
    }
    return advance(JumpSampler(g), start_state, estimate, 0.0, span, rng);
}

SimResult simulate(const FreshnessModel& model, const WaitingPolicy& w, const SimConfig& cfg) {
    if (cfg.batches == 0 || cfg.cycles < cfg.batches) {
        throw Error(ErrorCode::InvalidArgument, "need at least one cycle per batch");
    }
    const std::size_t n = model.states();
    const MatchProbabilityFn& match = model.match();
    const JumpSampler jumps(model.generator());
    std::mt19937_64 rng(cfg.seed);

    // Initial reply: state drawn from pi, aged by one backward delay.
    std::size_t reply_state = 0;
    {
        const Vector& pi = model.pi();
        const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        double acc = 0.0;
        reply_state = n - 1;
        for (std::size_t i = 0; i < n; ++i) {
            acc += pi(static_cast<Eigen::Index>(i));
            if (u < acc) {
                reply_state = i;
                break;
            }
        }
    }
    double reply_age = model.backward().sample(rng);
    const EstimatePiece hold_reply[] = {{0.0, reply_state}};
    std::size_t path_state = advance(jumps, reply_state, hold_reply, 0.0, reply_age, rng).end_state;

    SimResult res;
    res.seed = cfg.seed;
    res.cycles = cfg.cycles;
    res.phi_hat = Vector::Zero(static_cast<Eigen::Index>(n));
    res.transition_counts = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));

    const std::uint64_t per_batch = cfg.cycles / cfg.batches;
    std::vector<double> batch_fresh(cfg.batches, 0.0);
    std::vector<double> batch_time(cfg.batches, 0.0);
    double total_fresh = 0.0;
    double total_time = 0.0;
    std::vector<EstimatePiece> trajectory;

    for (std::uint64_t k = 0; k < cfg.burn_in + cfg.cycles; ++k) {
        const double wait = w.wait(reply_state, reply_age);
        const double y = model.forward().sample(rng);
        const double d = model.backward().sample(rng);

        trajectory.clear();
        for (const auto& p : match.pieces(reply_state)) {
            const double start = std::max(0.0, p.start - reply_age);
            if (!trajectory.empty() && start <= 0.0) trajectory.clear();
            trajectory.push_back({start, p.state});
        }
        // Query is answered at offset wait + y; the reply lands d later.
        const PathOutcome first = advance(jumps, path_state, trajectory, 0.0, wait + y, rng);
        const std::size_t sampled = first.end_state;
        const PathOutcome second = advance(jumps, sampled, trajectory, wait + y, wait + y + d, rng);
        path_state = second.end_state;

        if (k >= cfg.burn_in) {
            const std::uint64_t idx = k - cfg.burn_in;
            const std::uint64_t batch = std::min<std::uint64_t>(idx / per_batch, cfg.batches - 1);
            const double fresh = first.fresh_time + second.fresh_time;
            const double length = wait + y + d;
            batch_fresh[batch] += fresh;
            batch_time[batch] += length;
            total_fresh += fresh;
            total_time += length;
            res.phi_hat(static_cast<Eigen::Index>(reply_state)) += 1.0;
            res.transition_counts(static_cast<Eigen::Index>(reply_state),
                                  static_cast<Eigen::Index>(sampled)) += 1.0;
        }
        reply_state = sampled;
        reply_age = d;
    }

    res.mbf_hat = total_time > 0.0 ? total_fresh / total_time : 1.0;
    res.mean_cycle = total_time / static_cast<double>(cfg.cycles);
    res.phi_hat /= static_cast<double>(cfg.cycles);

    double sum = 0.0;
    double sum_sq = 0.0;
    const auto b = static_cast<double>(cfg.batches);
    for (std::uint64_t i = 0; i < cfg.batches; ++i) {
        const double r = batch_time[i] > 0.0 ? batch_fresh[i] / batch_time[i] : 1.0;
        sum += r;
        sum_sq += r * r;
    }
    const double mean = sum / b;
    const double var = std::max(0.0, (sum_sq - b * mean * mean) / (b - 1.0));
    res.stderr_mbf = cfg.batches > 1 ? std::sqrt(var / b) : 0.0;
    return res;
}

}  // namespace freshq
