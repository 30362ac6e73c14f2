#include "skelex/segmenter.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "skelex/se3.hpp"

namespace skelex {

namespace {

double pair_distance(const Pose& a, const Pose& b) { return (a.position - b.position).norm(); }

struct ObsTable {
    // [object index][t], dimension obs_dim
    std::vector<std::vector<Eigen::VectorXd>> obs;
    // run[i][t] = number of consecutive visible steps ending at t
    std::vector<std::vector<int>> vis_run;
};

ObsTable build_observations(const Demonstration& demo, const Config& cfg) {
    const int T = demo.length();
    const int n = demo.num_objects();
    ObsTable table;
    table.obs.assign(n, {});
    table.vis_run.assign(n, std::vector<int>(T, 0));
    for (int i = 0; i < n; ++i) {
        table.obs[i].resize(T);
        int run = 0;
        for (int t = 0; t < T; ++t) {
            run = demo.visible[i][t] ? run + 1 : 0;
            table.vis_run[i][t] = run;
            const Pose& p = demo.poses[i][t];
            if (cfg.obs_dim == 3) {
                table.obs[i][t] = p.position;
            } else {
                table.obs[i][t] = pose_to_vec6(p);
            }
        }
    }
    return table;
}

std::vector<std::pair<int, int>> candidate_pairs(const Demonstration& demo) {
    std::vector<int> ids;
    for (const auto& o : demo.objects) ids.push_back(o.id);
    std::sort(ids.begin(), ids.end());
    const NodeSet manips = demo.manipulator_ids();
    std::vector<std::pair<int, int>> pairs;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        for (std::size_t j = i + 1; j < ids.size(); ++j) {
            if (manips.count(ids[i]) && manips.count(ids[j])) continue;
            pairs.emplace_back(ids[i], ids[j]);
        }
    }
    return pairs;
}

std::vector<double> pair_mi_series(const Demonstration& demo, const ObsTable& table,
                                   const Config& cfg, int ia, int ib) {
    const int T = demo.length();
    const int w = cfg.window;
    std::vector<double> mi(T, 0.0);
    std::vector<Eigen::VectorXd> win_a(w + 1), win_b(w + 1);
    for (int t = w; t < T; ++t) {
        if (table.vis_run[ia][t] < w + 1 || table.vis_run[ib][t] < w + 1) continue;
        for (int k = 0; k <= w; ++k) {
            win_a[k] = table.obs[ia][t - w + k];
            win_b[k] = table.obs[ib][t - w + k];
        }
        const double value = mutual_information(win_a, win_b, cfg.reg);
        mi[t] = mi_significant(value, w + 1, cfg.obs_dim, cfg.obs_dim, cfg.mi_significance)
                    ? value
                    : 0.0;
    }
    return mi;
}

MiSignals compute_signals(const Demonstration& demo, const Config& cfg, bool parallel) {
    cfg.validate();
    if (demo.length() < cfg.window + 1) throw std::invalid_argument("demo too short");
    const ObsTable table = build_observations(demo, cfg);

    MiSignals out;
    out.pairs = candidate_pairs(demo);
    out.series.resize(out.pairs.size());

    const int np = static_cast<int>(out.pairs.size());
    if (parallel) {
#pragma omp parallel for schedule(dynamic)
        for (int p = 0; p < np; ++p) {
            out.series[p] = pair_mi_series(demo, table, cfg, demo.index_of(out.pairs[p].first),
                                           demo.index_of(out.pairs[p].second));
        }
    } else {
        for (int p = 0; p < np; ++p) {
            out.series[p] = pair_mi_series(demo, table, cfg, demo.index_of(out.pairs[p].first),
                                           demo.index_of(out.pairs[p].second));
        }
    }
    return out;
}

ScalarNormal fit_connectivity(const std::vector<std::pair<Pose, Pose>>& evidence) {
    std::vector<double> d;
    d.reserve(evidence.size());
    for (const auto& [a, b] : evidence) d.push_back(pair_distance(a, b));
    return fit_scalar_normal(d);
}

}  // namespace

MiSignals mi_signals(const Demonstration& demo, const Config& cfg) {
    return compute_signals(demo, cfg, true);
}

MiSignals mi_signals_serial(const Demonstration& demo, const Config& cfg) {
    return compute_signals(demo, cfg, false);
}

std::vector<EdgeTrack> track_edges(const Demonstration& demo, const MiSignals& signals,
                                   const Config& cfg) {
    const int T = demo.length();
    std::vector<EdgeTrack> out;

    for (std::size_t p = 0; p < signals.pairs.size(); ++p) {
        const auto [id_a, id_b] = signals.pairs[p];
        const int ia = demo.index_of(id_a);
        const int ib = demo.index_of(id_b);
        const auto& mi = signals.series[p];

        EdgeTrack cur;
        bool active = false;
        bool collecting = false;
        int last_high = -1;

        auto close_edge = [&](int b) {
            cur.raw_end = b;
            cur.start = cur.raw_start;
            cur.end = b;
            cur.connectivity = fit_connectivity(cur.evidence);
            cur.high_variance =
                cur.connectivity.stddev > 0.5 * std::max(std::abs(cur.connectivity.mean), 1e-9);
            if (cfg.min_edge_duration <= 0 ||
                cur.raw_end - cur.raw_start + 1 >= cfg.min_edge_duration) {
                out.push_back(cur);
            }
            cur = EdgeTrack{};
            active = collecting = false;
            last_high = -1;
        };

        for (int t = cfg.window; t < T; ++t) {
            const bool high = mi[t] >= cfg.mi_threshold;
            if (!active) {
                if (high) {
                    // evidence older than one window is discarded before activation
                    if (collecting && t - last_high > cfg.window) {
                        cur = EdgeTrack{};
                        collecting = false;
                    }
                    if (!collecting) {
                        collecting = true;
                        cur.pair = {id_a, id_b};
                        cur.raw_start = t;
                    }
                    cur.evidence.emplace_back(demo.poses[ia][t], demo.poses[ib][t]);
                    last_high = t;
                    if (static_cast<int>(cur.evidence.size()) > cfg.min_evidence) {
                        active = true;
                        cur.connectivity = fit_connectivity(cur.evidence);
                    }
                }
                continue;
            }

            // Active edge: the established model judges each new distance
            // first; evidence is absorbed only while the edge still holds.
            if (!demo.visible[ia][t] || !demo.visible[ib][t]) {
                close_edge(t - 1);
                continue;
            }
            const double dist = pair_distance(demo.poses[ia][t], demo.poses[ib][t]);
            if (!cur.connectivity.within_two_sided(dist, cfg.edge_threshold)) {
                close_edge(t - 1);
                continue;
            }
            if (high) {
                cur.evidence.emplace_back(demo.poses[ia][t], demo.poses[ib][t]);
                cur.connectivity = fit_connectivity(cur.evidence);
            }
        }
        if (active) close_edge(T - 1);
    }

    std::sort(out.begin(), out.end(), [](const EdgeTrack& a, const EdgeTrack& b) {
        if (a.pair != b.pair) return a.pair < b.pair;
        return a.raw_start < b.raw_start;
    });
    return out;
}

EdgeTrack extend_back(EdgeTrack edge, const Demonstration& demo, const Config& cfg) {
    const int ia = demo.index_of(edge.pair.first);
    const int ib = demo.index_of(edge.pair.second);
    while (edge.start > 0) {
        const int s = edge.start - 1;
        if (!demo.visible[ia][s] || !demo.visible[ib][s]) break;
        const double dist = pair_distance(demo.poses[ia][s], demo.poses[ib][s]);
        if (!edge.connectivity.within_two_sided(dist, cfg.edge_threshold)) break;
        edge.start = s;
    }
    return edge;
}

RestModel fit_rest_models(const Demonstration& demo, const std::vector<EdgeTrack>& edges) {
    const int T = demo.length();
    const NodeSet manips = demo.manipulator_ids();

    // Connectivity before pruning: intervals [start, raw_end].
    std::vector<EdgeTrack> unpruned = edges;
    for (auto& e : unpruned) e.end = e.raw_end;

    // manipulated[i][t]: path to a manipulator exists at t (manipulators always count).
    std::vector<std::vector<char>> manipulated(demo.num_objects(), std::vector<char>(T, 0));
    std::vector<int> breakpoints{0};
    for (const auto& e : unpruned) {
        breakpoints.push_back(e.start);
        if (e.end + 1 < T) breakpoints.push_back(e.end + 1);
    }
    std::sort(breakpoints.begin(), breakpoints.end());
    breakpoints.erase(std::unique(breakpoints.begin(), breakpoints.end()), breakpoints.end());
    for (std::size_t b = 0; b < breakpoints.size(); ++b) {
        const int t0 = breakpoints[b];
        const int t1 = b + 1 < breakpoints.size() ? breakpoints[b + 1] : T;
        const ManipGraph g = graph_at(demo, unpruned, t0);
        NodeSet reach;
        for (int m : manips) {
            const NodeSet comp = g.component_of(m);
            reach.insert(comp.begin(), comp.end());
        }
        for (int i = 0; i < demo.num_objects(); ++i) {
            const bool r = reach.count(demo.objects[i].id) > 0;
            if (r) {
                for (int t = t0; t < t1; ++t) manipulated[i][t] = 1;
            }
        }
    }

    RestModel rest;
    std::vector<double> pool;
    std::map<int, std::vector<double>> samples;
    for (int i = 0; i < demo.num_objects(); ++i) {
        const int id = demo.objects[i].id;
        auto& s = samples[id];
        for (int t = 1; t < T; ++t) {
            if (manipulated[i][t] || manipulated[i][t - 1]) continue;
            if (!demo.visible[i][t] || !demo.visible[i][t - 1]) continue;
            s.push_back((demo.poses[i][t].position - demo.poses[i][t - 1].position).norm());
        }
        pool.insert(pool.end(), s.begin(), s.end());
    }

    ScalarNormal fallback{0.0, 1e-6};
    if (!pool.empty()) {
        std::vector<double> sorted = pool;
        std::sort(sorted.begin(), sorted.end());
        const double median = sorted[sorted.size() / 2];
        fallback = fit_scalar_normal(pool);
        fallback.mean = median;
    }

    for (const auto& [id, s] : samples) {
        if (s.empty()) {
            rest.models[id] = fallback;
            rest.fallback_ids.insert(id);
        } else {
            rest.models[id] = fit_scalar_normal(s);
        }
    }
    return rest;
}

EdgeTrack prune_end(EdgeTrack edge, const RestModel& rest, const Demonstration& demo,
                    const Config& cfg) {
    const NodeSet manips = demo.manipulator_ids();
    if (!manips.count(edge.pair.first) && !manips.count(edge.pair.second)) return edge;

    const int ia = demo.index_of(edge.pair.first);
    const int ib = demo.index_of(edge.pair.second);
    const ScalarNormal& ra = rest.models.at(edge.pair.first);
    const ScalarNormal& rb = rest.models.at(edge.pair.second);

    while (edge.end > edge.start) {
        const int t = edge.end;
        if (t == 0) break;
        if (!demo.visible[ia][t] || !demo.visible[ia][t - 1] || !demo.visible[ib][t] ||
            !demo.visible[ib][t - 1]) {
            break;
        }
        const double da = (demo.poses[ia][t].position - demo.poses[ia][t - 1].position).norm();
        const double db = (demo.poses[ib][t].position - demo.poses[ib][t - 1].position).norm();
        if (!ra.within_upper(da, cfg.rest_threshold) || !rb.within_upper(db, cfg.rest_threshold)) {
            break;
        }
        edge.end = t - 1;
    }
    return edge;
}

ManipGraph graph_at(const Demonstration& demo, const std::vector<EdgeTrack>& edges, int t) {
    ManipGraph g;
    for (const auto& o : demo.objects) g.add_node(o.id);
    const NodeSet manips = demo.manipulator_ids();
    for (const auto& e : edges) {
        if (e.start <= t && t <= e.end) g.add_edge(e.pair.first, e.pair.second, manips);
    }
    return g;
}

SegmentationResult segment(const Demonstration& demo_in, const Config& cfg) {
    cfg.validate();
    const Demonstration demo =
        cfg.smoothing ? smooth_trajectories(demo_in, cfg.smoothing_window) : demo_in;

    const MiSignals signals = mi_signals(demo, cfg);
    std::vector<EdgeTrack> edges = track_edges(demo, signals, cfg);
    for (auto& e : edges) e = extend_back(std::move(e), demo, cfg);
    const RestModel rest = fit_rest_models(demo, edges);
    for (auto& e : edges) e = prune_end(std::move(e), rest, demo, cfg);

    SegmentationResult result;
    result.edges = edges;

    const int T = demo.length();
    const NodeSet manips = demo.manipulator_ids();

    std::vector<int> breakpoints{0};
    for (const auto& e : edges) {
        breakpoints.push_back(e.start);
        if (e.end + 1 < T) breakpoints.push_back(e.end + 1);
    }
    std::sort(breakpoints.begin(), breakpoints.end());
    breakpoints.erase(std::unique(breakpoints.begin(), breakpoints.end()), breakpoints.end());

    result.steps.push_back({0, partition(graph_at(demo, edges, 0), manips)});
    for (int bp : breakpoints) {
        if (bp == 0) continue;
        SubgraphPartition part = partition(graph_at(demo, edges, bp), manips);
        if (step_change(result.steps.back().part, part)) {
            auto evs = diff_events(result.steps.back().part, part, bp);
            result.events.insert(result.events.end(), evs.begin(), evs.end());
            result.steps.push_back({bp, std::move(part)});
        }
    }
    return result;
}

}  // namespace skelex
