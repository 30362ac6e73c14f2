#include "skelex/matcher.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace skelex {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kForbidden = -1e9;  // non-positive similarity inside the heuristic

double clipped_log_sim(double dot) {
    if (dot <= 0.0) return kForbidden;
    return std::log(std::clamp(dot, 1e-6, 1.0));
}

// One pool of the matching problem: per demo, indices into DemoFeatures.
struct Pool {
    std::vector<std::vector<int>> members;  // [demo][slot] -> index into demos[demo]
};

Pool make_pool(const std::vector<DemoFeatures>& demos, bool manipulators) {
    Pool p;
    p.members.resize(demos.size());
    for (std::size_t n = 0; n < demos.size(); ++n) {
        std::vector<int> order(demos[n].ids.size());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(),
                  [&](int a, int b) { return demos[n].ids[a] < demos[n].ids[b]; });
        for (int idx : order) {
            if ((demos[n].manipulator[idx] != 0) == manipulators) p.members[n].push_back(idx);
        }
    }
    return p;
}

std::size_t pool_min_count(const Pool& p) {
    std::size_t k = std::numeric_limits<std::size_t>::max();
    for (const auto& m : p.members) k = std::min(k, m.size());
    return k;
}

double pair_log_sim(const std::vector<DemoFeatures>& demos, int demo_a, int obj_a, int demo_b,
                    int obj_b) {
    const double dot = demos[demo_a].features[obj_a].dot(demos[demo_b].features[obj_b]);
    return dot > 0.0 ? std::log(dot) : -kInf;
}

// Exhaustive enumeration over one pool. tuples[k][demo] = member index.
struct PoolSolution {
    std::vector<std::vector<int>> tuples;  // indices into demos[demo]
    double score = -kInf;
};

class Enumerator {
public:
    Enumerator(const std::vector<DemoFeatures>& demos, const Pool& pool)
        : demos_(demos), pool_(pool), n_(pool.members.size()) {
        k_ = pool_min_count(pool);
        base_ = 0;
        for (std::size_t d = 0; d < n_; ++d) {
            if (pool_.members[d].size() < pool_.members[base_].size()) base_ = d;
        }
        order_.push_back(base_);
        for (std::size_t d = 0; d < n_; ++d) {
            if (d != base_) order_.push_back(d);
        }
        double count = 1.0;
        for (std::size_t d = 1; d < order_.size(); ++d) {
            const double m = static_cast<double>(pool_.members[order_[d]].size());
            for (std::size_t s = 0; s < k_; ++s) count *= (m - static_cast<double>(s));
            if (count > 1e7) throw std::invalid_argument("use heuristic");
        }
    }

    PoolSolution run() {
        if (k_ == 0) return best_;
        chosen_.assign(order_.size(), std::vector<int>(k_, -1));
        for (std::size_t s = 0; s < k_; ++s) chosen_[0][s] = pool_.members[base_][s];
        recurse(1, 0, 0.0);
        return best_;
    }

private:
    void recurse(std::size_t demo_pos, std::size_t slot, double score) {
        if (demo_pos == order_.size()) {
            consider(score);
            return;
        }
        if (slot == k_) {
            recurse(demo_pos + 1, 0, score);
            return;
        }
        const std::size_t d = order_[demo_pos];
        for (int idx : pool_.members[d]) {
            bool used = false;
            for (std::size_t s = 0; s < slot; ++s) {
                if (chosen_[demo_pos][s] == idx) { used = true; break; }
            }
            if (used) continue;
            double add = 0.0;
            for (std::size_t p = 0; p < demo_pos; ++p) {
                add += pair_log_sim(demos_, static_cast<int>(order_[p]), chosen_[p][slot],
                                    static_cast<int>(d), idx);
            }
            chosen_[demo_pos][slot] = idx;
            recurse(demo_pos, slot + 1, score + add);
            chosen_[demo_pos][slot] = -1;
        }
    }

    void consider(double score) {
        if (score < best_.score) return;
        std::vector<std::vector<int>> tuples(k_, std::vector<int>(n_));
        for (std::size_t s = 0; s < k_; ++s) {
            for (std::size_t p = 0; p < order_.size(); ++p) tuples[s][order_[p]] = chosen_[p][s];
        }
        std::sort(tuples.begin(), tuples.end());
        if (score > best_.score || (score == best_.score && tuples < best_.tuples) ||
            best_.tuples.empty()) {
            best_.score = score;
            best_.tuples = std::move(tuples);
        }
    }

    const std::vector<DemoFeatures>& demos_;
    const Pool& pool_;
    std::size_t n_;
    std::size_t k_ = 0;
    std::size_t base_ = 0;
    std::vector<std::size_t> order_;
    std::vector<std::vector<int>> chosen_;  // [demo_pos][slot] -> member index
    PoolSolution best_;
};

PoolSolution solve_pool_exhaustive(const std::vector<DemoFeatures>& demos, const Pool& pool) {
    return Enumerator(demos, pool).run();
}

PoolSolution solve_pool_heuristic(const std::vector<DemoFeatures>& demos, const Pool& pool) {
    const std::size_t n = pool.members.size();
    const std::size_t k = pool_min_count(pool);
    PoolSolution sol;
    if (k == 0) {
        sol.score = 0.0;
        return sol;
    }

    // Demonstrations ordered by pool size ascending (stable).
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return pool.members[a].size() < pool.members[b].size();
    });

    // tuples[s][demo] = member index; filled demo by demo.
    std::vector<std::vector<int>> tuples(k, std::vector<int>(n, -1));
    for (std::size_t s = 0; s < k; ++s) tuples[s][order[0]] = pool.members[order[0]][s];

    std::vector<std::size_t> placed{order[0]};
    for (std::size_t oi = 1; oi < order.size(); ++oi) {
        const std::size_t d = order[oi];
        const auto& cand = pool.members[d];
        Eigen::MatrixXd cost(k, cand.size());
        for (std::size_t s = 0; s < k; ++s) {
            for (std::size_t c = 0; c < cand.size(); ++c) {
                double gain = 0.0;
                for (std::size_t pd : placed) {
                    const double dot = demos[pd].features[tuples[s][pd]].dot(demos[d].features[cand[c]]);
                    gain += clipped_log_sim(dot);
                }
                cost(s, c) = -gain;
            }
        }
        const std::vector<int> pick = hungarian_min_cost(cost);
        for (std::size_t s = 0; s < k; ++s) tuples[s][d] = cand[pick[s]];
        placed.push_back(d);
    }

    // One pairwise 2-opt pass over every demo and tuple pair.
    auto clipped_tuple_pair_delta = [&](std::size_t i, std::size_t j, std::size_t d) {
        double delta = 0.0;
        for (std::size_t m = 0; m < n; ++m) {
            if (m == d) continue;
            const auto& fi_m = demos[m].features[tuples[i][m]];
            const auto& fj_m = demos[m].features[tuples[j][m]];
            const auto& fi_d = demos[d].features[tuples[i][d]];
            const auto& fj_d = demos[d].features[tuples[j][d]];
            delta += clipped_log_sim(fi_m.dot(fj_d)) + clipped_log_sim(fj_m.dot(fi_d)) -
                     clipped_log_sim(fi_m.dot(fi_d)) - clipped_log_sim(fj_m.dot(fj_d));
        }
        return delta;
    };
    for (std::size_t d = 0; d < n; ++d) {
        for (std::size_t i = 0; i < k; ++i) {
            for (std::size_t j = i + 1; j < k; ++j) {
                if (clipped_tuple_pair_delta(i, j, d) > 1e-12) {
                    std::swap(tuples[i][d], tuples[j][d]);
                }
            }
        }
    }

    std::sort(tuples.begin(), tuples.end());
    sol.tuples = std::move(tuples);
    sol.score = 0.0;
    for (const auto& tup : sol.tuples) {
        for (std::size_t a = 0; a < n; ++a) {
            for (std::size_t b = a + 1; b < n; ++b) {
                sol.score += pair_log_sim(demos, static_cast<int>(a), tup[a],
                                          static_cast<int>(b), tup[b]);
            }
        }
    }
    return sol;
}

Assignment merge_pools(const std::vector<DemoFeatures>& demos, const PoolSolution& manips,
                       const PoolSolution& objects) {
    Assignment out;
    auto emit = [&](const PoolSolution& s) {
        for (const auto& tup : s.tuples) {
            std::vector<int> ids(tup.size());
            for (std::size_t n = 0; n < tup.size(); ++n) ids[n] = demos[n].ids[tup[n]];
            out.tuples.push_back(std::move(ids));
        }
    };
    emit(manips);
    emit(objects);
    std::sort(out.tuples.begin(), out.tuples.end(),
              [](const auto& a, const auto& b) { return a[0] < b[0]; });
    out.score = (manips.tuples.empty() ? 0.0 : manips.score) +
                (objects.tuples.empty() ? 0.0 : objects.score);
    return out;
}

}  // namespace

DemoFeatures features_of(const Demonstration& demo) {
    DemoFeatures f;
    for (const auto& o : demo.objects) {
        f.ids.push_back(o.id);
        f.features.push_back(o.feature.normalized());
        f.manipulator.push_back(o.manipulator ? 1 : 0);
    }
    return f;
}

double tuple_score(const std::vector<int>& tuple, const std::vector<DemoFeatures>& demos) {
    double s = 0.0;
    for (std::size_t a = 0; a < tuple.size(); ++a) {
        const int ia = static_cast<int>(std::distance(
            demos[a].ids.begin(), std::find(demos[a].ids.begin(), demos[a].ids.end(), tuple[a])));
        for (std::size_t b = a + 1; b < tuple.size(); ++b) {
            const int ib = static_cast<int>(std::distance(
                demos[b].ids.begin(),
                std::find(demos[b].ids.begin(), demos[b].ids.end(), tuple[b])));
            s += pair_log_sim(demos, static_cast<int>(a), ia, static_cast<int>(b), ib);
        }
    }
    return s;
}

double tuple_mean_similarity(const std::vector<int>& tuple,
                             const std::vector<DemoFeatures>& demos) {
    double s = 0.0;
    int count = 0;
    for (std::size_t a = 0; a < tuple.size(); ++a) {
        const int ia = static_cast<int>(std::distance(
            demos[a].ids.begin(), std::find(demos[a].ids.begin(), demos[a].ids.end(), tuple[a])));
        for (std::size_t b = a + 1; b < tuple.size(); ++b) {
            const int ib = static_cast<int>(std::distance(
                demos[b].ids.begin(),
                std::find(demos[b].ids.begin(), demos[b].ids.end(), tuple[b])));
            s += demos[a].features[ia].dot(demos[b].features[ib]);
            ++count;
        }
    }
    return count > 0 ? s / count : 0.0;
}

double score_assignment(const Assignment& a, const std::vector<DemoFeatures>& demos) {
    double s = 0.0;
    for (const auto& tup : a.tuples) s += tuple_score(tup, demos);
    return s;
}

Assignment solve_exhaustive(const std::vector<DemoFeatures>& demos) {
    if (demos.size() < 2) throw std::invalid_argument("need at least two demonstrations");
    const Pool mpool = make_pool(demos, true);
    const Pool opool = make_pool(demos, false);
    return merge_pools(demos, solve_pool_exhaustive(demos, mpool),
                       solve_pool_exhaustive(demos, opool));
}

Assignment solve_heuristic(const std::vector<DemoFeatures>& demos) {
    if (demos.size() < 2) throw std::invalid_argument("need at least two demonstrations");
    const Pool mpool = make_pool(demos, true);
    const Pool opool = make_pool(demos, false);
    return merge_pools(demos, solve_pool_heuristic(demos, mpool),
                       solve_pool_heuristic(demos, opool));
}

std::vector<int> hungarian_min_cost(const Eigen::MatrixXd& cost_in) {
    const int rows = static_cast<int>(cost_in.rows());
    const int cols = static_cast<int>(cost_in.cols());
    if (rows > cols) throw std::invalid_argument("hungarian: rows must not exceed columns");

    // Pad to a square matrix with zero-cost dummy rows.
    const int n = cols;
    Eigen::MatrixXd cost = Eigen::MatrixXd::Zero(n, n);
    cost.topRows(rows) = cost_in;

    // Jonker-style shortest augmenting path, O(n^3).
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, kInf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            int j1 = 0;
            double delta = kInf;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }

    std::vector<int> rowsol(rows, -1);
    for (int j = 1; j <= n; ++j) {
        if (p[j] >= 1 && p[j] <= rows) rowsol[p[j] - 1] = j - 1;
    }
    return rowsol;
}

std::vector<std::map<int, int>> identity_maps(const Assignment& a) {
    std::vector<std::map<int, int>> maps;
    if (a.tuples.empty()) return maps;
    maps.resize(a.tuples.front().size());
    for (const auto& tup : a.tuples) {
        const int identity = tup[0];
        for (std::size_t n = 0; n < tup.size(); ++n) maps[n][tup[n]] = identity;
    }
    return maps;
}

}  // namespace skelex
