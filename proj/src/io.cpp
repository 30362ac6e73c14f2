#include "skelex/io.hpp"

#include <fstream>
#include <stdexcept>

namespace skelex {

namespace {

ordered_json vec_to_json(const Eigen::VectorXd& v) {
    ordered_json a = ordered_json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

Eigen::VectorXd vec_from_json(const nlohmann::json& j) {
    Eigen::VectorXd v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) v(i) = j[i].get<double>();
    return v;
}

ordered_json nodes_to_json(const NodeSet& s) {
    ordered_json a = ordered_json::array();
    for (int id : s) a.push_back(id);
    return a;
}

NodeSet nodes_from_json(const nlohmann::json& j) {
    NodeSet s;
    for (const auto& v : j) s.insert(v.get<int>());
    return s;
}

ordered_json pose_to_json(const Pose& p) {
    ordered_json j;
    j["p"] = {p.position.x(), p.position.y(), p.position.z()};
    j["q"] = {p.rotation.w(), p.rotation.x(), p.rotation.y(), p.rotation.z()};
    return j;
}

Pose pose_from_json(const nlohmann::json& j) {
    Pose p;
    const auto& pos = j.at("p");
    p.position = Vec3(pos[0].get<double>(), pos[1].get<double>(), pos[2].get<double>());
    const auto& q = j.at("q");
    p.rotation = Quat(q[0].get<double>(), q[1].get<double>(), q[2].get<double>(),
                      q[3].get<double>());
    return p;
}

void check_schema(const nlohmann::json& j) {
    if (j.is_object() && j.contains("schema")) {
        const auto s = j.at("schema").get<std::string>();
        if (s != kSchemaVersion) {
            throw std::invalid_argument("unsupported schema version: " + s);
        }
    }
}

ordered_json mvn_to_json(const Mvn& m) {
    ordered_json j;
    j["mean"] = vec_to_json(m.mean);
    ordered_json cov = ordered_json::array();
    for (Eigen::Index r = 0; r < m.covariance.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.covariance.cols(); ++c) cov.push_back(m.covariance(r, c));
    }
    j["cov"] = std::move(cov);
    return j;
}

Mvn mvn_from_json(const nlohmann::json& j) {
    Mvn m;
    m.mean = vec_from_json(j.at("mean"));
    const Eigen::Index d = m.mean.size();
    const auto& cov = j.at("cov");
    if (static_cast<Eigen::Index>(cov.size()) != d * d) {
        throw std::invalid_argument("covariance size does not match mean dimension");
    }
    m.covariance.resize(d, d);
    for (Eigen::Index r = 0; r < d; ++r) {
        for (Eigen::Index c = 0; c < d; ++c) {
            m.covariance(r, c) = cov[r * d + c].get<double>();
        }
    }
    return m;
}

}  // namespace

ordered_json demo_to_json(const Demonstration& demo) {
    ordered_json j;
    j["schema"] = kSchemaVersion;
    ordered_json objs = ordered_json::array();
    for (const auto& o : demo.objects) {
        ordered_json jo;
        jo["id"] = o.id;
        jo["name"] = o.name;
        jo["manipulator"] = o.manipulator;
        jo["feature"] = vec_to_json(o.feature);
        objs.push_back(std::move(jo));
    }
    j["objects"] = std::move(objs);
    ordered_json frames = ordered_json::array();
    const int T = demo.length();
    for (int t = 0; t < T; ++t) {
        ordered_json f;
        f["t"] = t;
        ordered_json poses = ordered_json::array();
        for (int i = 0; i < demo.num_objects(); ++i) {
            ordered_json p;
            p["id"] = demo.objects[i].id;
            const Pose& pose = demo.poses[i][t];
            p["p"] = {pose.position.x(), pose.position.y(), pose.position.z()};
            p["q"] = {pose.rotation.w(), pose.rotation.x(), pose.rotation.y(),
                      pose.rotation.z()};
            p["visible"] = demo.visible[i][t] != 0;
            poses.push_back(std::move(p));
        }
        f["poses"] = std::move(poses);
        frames.push_back(std::move(f));
    }
    j["frames"] = std::move(frames);
    return j;
}

Demonstration demo_from_json(const nlohmann::json& j) {
    check_schema(j);
    Demonstration demo;
    for (const auto& jo : j.at("objects")) {
        ObjectInfo o;
        o.id = jo.at("id").get<int>();
        o.name = jo.value("name", std::string{});
        o.manipulator = jo.value("manipulator", false);
        o.feature = vec_from_json(jo.at("feature"));
        demo.objects.push_back(std::move(o));
    }
    const auto& frames = j.at("frames");
    const int T = static_cast<int>(frames.size());
    demo.poses.assign(demo.objects.size(), std::vector<Pose>(T));
    demo.visible.assign(demo.objects.size(), std::vector<char>(T, 0));
    int t = 0;
    for (const auto& f : frames) {
        for (const auto& jp : f.at("poses")) {
            const int id = jp.at("id").get<int>();
            const int idx = demo.index_of(id);
            if (idx < 0) throw std::invalid_argument("frame references unknown object id");
            demo.poses[idx][t] = pose_from_json(jp);
            demo.visible[idx][t] = jp.value("visible", true) ? 1 : 0;
        }
        ++t;
    }
    demo.validate_and_normalize();
    return demo;
}

ordered_json events_to_json(const std::vector<Event>& events) {
    ordered_json arr = ordered_json::array();
    for (const Event& e : events) {
        ordered_json j;
        j["kind"] = to_string(e.kind);
        j["time"] = e.time;
        if (e.kind == EventKind::Add) {
            j["nodes"] = nodes_to_json(e.nodes);
            if (e.target == kWorldTarget) j["target"] = "world";
            else j["target"] = e.target;
            j["host"] = nodes_to_json(e.target_nodes);
        } else {
            ordered_json pair = ordered_json::array();
            pair.push_back(nodes_to_json(e.nodes));
            pair.push_back(nodes_to_json(e.nodes_b));
            j["nodes"] = std::move(pair);
            j["target"] = nullptr;
            j["host"] = nullptr;
        }
        arr.push_back(std::move(j));
    }
    return arr;
}

std::vector<Event> events_from_json(const nlohmann::json& j) {
    std::vector<Event> out;
    for (const auto& je : j) {
        Event e;
        const auto kind = je.at("kind").get<std::string>();
        e.time = je.at("time").get<int>();
        if (kind == "add") {
            e.kind = EventKind::Add;
            e.nodes = nodes_from_json(je.at("nodes"));
            const auto& target = je.at("target");
            e.target = target.is_string() ? kWorldTarget : target.get<int>();
            if (je.contains("host") && !je.at("host").is_null()) {
                e.target_nodes = nodes_from_json(je.at("host"));
            }
        } else if (kind == "merge" || kind == "split") {
            e.kind = kind == "merge" ? EventKind::Merge : EventKind::Split;
            const auto& pair = je.at("nodes");
            e.nodes = nodes_from_json(pair.at(0));
            e.nodes_b = nodes_from_json(pair.at(1));
        } else {
            throw std::invalid_argument("unknown event kind: " + kind);
        }
        out.push_back(std::move(e));
    }
    return out;
}

ordered_json labels_to_json(const GroundTruth& truth) {
    ordered_json j;
    j["schema"] = kSchemaVersion;
    ordered_json per_demo = ordered_json::array();
    for (const auto& evs : truth.events) per_demo.push_back(events_to_json(evs));
    j["events"] = std::move(per_demo);
    ordered_json steps = ordered_json::array();
    for (const auto& s : truth.skeleton) {
        ordered_json js;
        js["moved"] = nodes_to_json(s.moved);
        if (s.target == kWorldTarget) js["target"] = "world";
        else js["target"] = s.target;
        js["references"] = nodes_to_json(s.references);
        steps.push_back(std::move(js));
    }
    j["skeleton"] = ordered_json{{"steps", std::move(steps)}};
    ordered_json timings = ordered_json::array();
    for (const auto& demo_t : truth.timings) {
        ordered_json arr = ordered_json::array();
        for (const auto& tm : demo_t) {
            arr.push_back(ordered_json{{"a", tm.object_a},
                                       {"b", tm.object_b},
                                       {"start", tm.start},
                                       {"end", tm.end}});
        }
        timings.push_back(std::move(arr));
    }
    j["timings"] = std::move(timings);
    j["true_reference"] = truth.true_reference;
    return j;
}

GroundTruth labels_from_json(const nlohmann::json& j) {
    check_schema(j);
    GroundTruth truth;
    for (const auto& evs : j.at("events")) truth.events.push_back(events_from_json(evs));
    for (const auto& js : j.at("skeleton").at("steps")) {
        LabelStep s;
        s.moved = nodes_from_json(js.at("moved"));
        const auto& target = js.at("target");
        s.target = target.is_string() ? kWorldTarget : target.get<int>();
        s.references = nodes_from_json(js.at("references"));
        truth.skeleton.push_back(std::move(s));
    }
    if (j.contains("timings")) {
        for (const auto& arr : j.at("timings")) {
            std::vector<EdgeTiming> demo_t;
            for (const auto& tm : arr) {
                demo_t.push_back(EdgeTiming{tm.at("a").get<int>(), tm.at("b").get<int>(),
                                            tm.at("start").get<int>(), tm.at("end").get<int>()});
            }
            truth.timings.push_back(std::move(demo_t));
        }
    }
    truth.true_reference = j.value("true_reference", -1);
    return truth;
}

ordered_json assignment_to_json(const Assignment& a, const std::vector<DemoFeatures>& demos) {
    ordered_json j;
    j["schema"] = kSchemaVersion;
    ordered_json ids = ordered_json::array();
    for (const auto& tup : a.tuples) {
        ordered_json jt;
        jt["identity"] = tup[0];
        jt["per_demo_object_ids"] = tup;
        jt["mean_similarity"] = tuple_mean_similarity(tup, demos);
        ids.push_back(std::move(jt));
    }
    j["identities"] = std::move(ids);
    j["score"] = a.score;
    return j;
}

ordered_json config_to_json(const Config& cfg) {
    ordered_json j;
    j["alpha_w"] = cfg.window;
    j["alpha_z"] = cfg.min_evidence;
    j["alpha_mi"] = cfg.mi_threshold;
    j["alpha_e"] = cfg.edge_threshold;
    j["alpha_a"] = cfg.activation_threshold;
    j["alpha_rest"] = cfg.rest_threshold;
    j["obs_dim"] = cfg.obs_dim;
    j["smoothing"] = cfg.smoothing;
    j["smoothing_window"] = cfg.smoothing_window;
    j["min_edge_duration"] = cfg.min_edge_duration;
    j["reg"] = cfg.reg;
    j["mi_significance"] = cfg.mi_significance;
    return j;
}

Config config_from_json(const nlohmann::json& j, Config base) {
    check_schema(j);
    Config c = base;
    c.window = j.value("alpha_w", c.window);
    c.min_evidence = j.value("alpha_z", c.min_evidence);
    c.mi_threshold = j.value("alpha_mi", c.mi_threshold);
    c.edge_threshold = j.value("alpha_e", c.edge_threshold);
    c.activation_threshold = j.value("alpha_a", c.activation_threshold);
    c.rest_threshold = j.value("alpha_rest", c.rest_threshold);
    c.obs_dim = j.value("obs_dim", c.obs_dim);
    c.smoothing = j.value("smoothing", c.smoothing);
    c.smoothing_window = j.value("smoothing_window", c.smoothing_window);
    c.min_edge_duration = j.value("min_edge_duration", c.min_edge_duration);
    c.reg = j.value("reg", c.reg);
    c.mi_significance = j.value("mi_significance", c.mi_significance);
    c.validate();
    return c;
}

ordered_json skeleton_to_json(const TaskSkeleton& skeleton) {
    ordered_json j;
    j["schema"] = kSchemaVersion;
    ordered_json ids = ordered_json::array();
    for (const auto& i : skeleton.identities) {
        ordered_json ji;
        ji["id"] = i.id;
        ji["name"] = i.name;
        ji["manipulator"] = i.manipulator;
        ji["feature"] = vec_to_json(i.mean_feature);
        ids.push_back(std::move(ji));
    }
    j["identities"] = std::move(ids);

    ordered_json steps = ordered_json::array();
    for (const auto& s : skeleton.steps) {
        ordered_json js;
        js["moved"] = nodes_to_json(s.moved);
        if (s.target == kWorldTarget) js["target"] = "world";
        else js["target"] = s.target;
        js["host"] = nodes_to_json(s.anchor_target_nodes);
        js["references"] = nodes_to_json(s.references);
        ordered_json dists = ordered_json::array();
        for (const auto& d : s.dists) {
            ordered_json jd;
            jd["ref"] = d.ref;
            jd["obj"] = d.obj;
            jd["direction"] = d.obj_in_ref_frame ? "obj_in_ref" : "ref_in_obj";
            jd["mean"] = mvn_to_json(d.model)["mean"];
            jd["cov"] = mvn_to_json(d.model)["cov"];
            dists.push_back(std::move(jd));
        }
        js["distributions"] = std::move(dists);
        js["action_hint"] = s.action_hint;
        js["low_confidence"] = s.low_confidence;
        js["ambiguous_reference"] = s.ambiguous_reference;
        js["anchor_demo"] = s.anchor_demo;
        js["anchor_time"] = s.anchor_time;
        js["support"] = s.support;
        steps.push_back(std::move(js));
    }
    j["steps"] = std::move(steps);

    ordered_json prov;
    prov["training_demos"] = skeleton.training_demos;
    prov["config"] = config_to_json(skeleton.config);
    prov["seed"] = skeleton.seed;
    j["provenance"] = std::move(prov);
    return j;
}

TaskSkeleton skeleton_from_json(const nlohmann::json& j) {
    check_schema(j);
    TaskSkeleton s;
    for (const auto& ji : j.at("identities")) {
        IdentityInfo i;
        i.id = ji.at("id").get<int>();
        i.name = ji.value("name", std::string{});
        i.manipulator = ji.value("manipulator", false);
        i.mean_feature = vec_from_json(ji.at("feature"));
        s.identities.push_back(std::move(i));
    }
    for (const auto& js : j.at("steps")) {
        StepModel m;
        m.moved = nodes_from_json(js.at("moved"));
        const auto& target = js.at("target");
        m.target = target.is_string() ? kWorldTarget : target.get<int>();
        m.anchor_target_nodes = nodes_from_json(js.at("host"));
        m.references = nodes_from_json(js.at("references"));
        for (const auto& jd : js.at("distributions")) {
            RelDist d;
            d.ref = jd.at("ref").get<int>();
            d.obj = jd.at("obj").get<int>();
            d.obj_in_ref_frame = jd.at("direction").get<std::string>() == "obj_in_ref";
            d.model = mvn_from_json(jd);
            m.dists.push_back(std::move(d));
        }
        m.action_hint = js.value("action_hint", std::string{"unsupported"});
        m.low_confidence = js.value("low_confidence", false);
        m.ambiguous_reference = js.value("ambiguous_reference", false);
        m.anchor_demo = js.value("anchor_demo", 0);
        m.anchor_time = js.value("anchor_time", 0);
        if (js.contains("support")) {
            for (const auto& v : js.at("support")) m.support.push_back(v.get<int>());
        }
        s.steps.push_back(std::move(m));
    }
    const auto& prov = j.at("provenance");
    if (prov.contains("training_demos")) {
        for (const auto& v : prov.at("training_demos")) s.training_demos.push_back(v.get<int>());
    }
    s.config = config_from_json(prov.at("config"));
    s.seed = prov.value("seed", 0ULL);
    return s;
}

ordered_json scene_to_json(const Scene& scene) {
    ordered_json j;
    j["schema"] = kSchemaVersion;
    ordered_json objs = ordered_json::array();
    for (const auto& o : scene.objects) {
        ordered_json jo;
        jo["name"] = o.name;
        jo["manipulator"] = o.manipulator;
        jo["feature"] = vec_to_json(o.feature);
        jo["p"] = {o.pose.position.x(), o.pose.position.y(), o.pose.position.z()};
        jo["q"] = {o.pose.rotation.w(), o.pose.rotation.x(), o.pose.rotation.y(),
                   o.pose.rotation.z()};
        jo["visible"] = o.visible;
        objs.push_back(std::move(jo));
    }
    j["objects"] = std::move(objs);
    return j;
}

Scene scene_from_json(const nlohmann::json& j) {
    check_schema(j);
    Scene s;
    for (const auto& jo : j.at("objects")) {
        SceneObject o;
        o.name = jo.value("name", std::string{});
        o.manipulator = jo.value("manipulator", false);
        o.feature = vec_from_json(jo.at("feature"));
        o.pose = pose_from_json(jo);
        o.visible = jo.value("visible", true);
        s.objects.push_back(std::move(o));
    }
    return s;
}

ordered_json plan_to_json(const std::vector<ActionStep>& actions) {
    ordered_json j;
    j["schema"] = kSchemaVersion;
    ordered_json arr = ordered_json::array();
    for (const auto& a : actions) {
        ordered_json ja;
        ja["kind"] = a.kind;
        ja["object"] = a.object;
        ja["target_pose"] = pose_to_json(a.target);
        ja["loglik"] = a.loglik;
        ja["flagged"] = a.flagged;
        if (!a.note.empty()) ja["note"] = a.note;
        arr.push_back(std::move(ja));
    }
    j["actions"] = std::move(arr);
    return j;
}

TaskTemplate template_from_json(const nlohmann::json& j) {
    check_schema(j);
    TaskTemplate t;
    std::map<std::string, int> by_name;
    for (const auto& jr : j.at("roster")) {
        RosterEntry r;
        r.name = jr.at("name").get<std::string>();
        const auto role = jr.value("role", std::string{"movable"});
        if (role == "manipulator") r.role = Role::Manipulator;
        else if (role == "reference") r.role = Role::Reference;
        else if (role == "distractor") r.role = Role::Distractor;
        else r.role = Role::Movable;
        if (jr.contains("base_position")) {
            const auto& p = jr.at("base_position");
            r.base_position = Vec3(p[0].get<double>(), p[1].get<double>(), p[2].get<double>());
        }
        r.position_jitter = jr.value("jitter", 0.0);
        by_name[r.name] = static_cast<int>(t.roster.size());
        t.roster.push_back(std::move(r));
    }
    auto lookup = [&](const nlohmann::json& js, const char* key) -> int {
        if (!js.contains(key)) return -1;
        const auto& v = js.at(key);
        if (v.is_number_integer()) return v.get<int>();
        const auto name = v.get<std::string>();
        auto it = by_name.find(name);
        if (it == by_name.end()) {
            throw std::invalid_argument("script references unknown roster name: " + name);
        }
        return it->second;
    };
    for (const auto& jp : j.at("script")) {
        Primitive p;
        const auto kind = jp.at("kind").get<std::string>();
        if (kind == "approach") p.kind = PrimitiveKind::Approach;
        else if (kind == "grasp") p.kind = PrimitiveKind::Grasp;
        else if (kind == "carry_to") p.kind = PrimitiveKind::CarryTo;
        else if (kind == "release") p.kind = PrimitiveKind::Release;
        else if (kind == "retreat") p.kind = PrimitiveKind::Retreat;
        else if (kind == "dwell") p.kind = PrimitiveKind::Dwell;
        else if (kind == "bump") p.kind = PrimitiveKind::Bump;
        else throw std::invalid_argument("unknown primitive kind: " + kind);
        p.manipulator = lookup(jp, "manipulator");
        p.object = lookup(jp, "object");
        p.reference = lookup(jp, "reference");
        if (jp.contains("offset")) {
            const auto& o = jp.at("offset");
            p.offset = Vec3(o[0].get<double>(), o[1].get<double>(), o[2].get<double>());
        }
        p.offset_stddev = jp.value("offset_stddev", 0.0);
        p.every_k_demos = jp.value("every_k_demos", 1);
        t.script.push_back(p);
    }
    t.noise_pos = j.value("noise_pos", 0.0);
    t.noise_rot = j.value("noise_rot", 0.0);
    t.steps_per_primitive = j.value("steps_per_primitive", 50);
    t.feature_similarity = j.value("feature_similarity", 0.95);
    t.feature_dim = j.value("feature_dim", 16);
    if (j.contains("occlusions")) {
        for (const auto& jo : j.at("occlusions")) {
            OcclusionSpan span;
            span.object = lookup(jo, "object");
            span.t0 = jo.at("t0").get<int>();
            span.t1 = jo.at("t1").get<int>();
            t.occlusions.push_back(span);
        }
    }
    return t;
}

ordered_json template_to_json(const TaskTemplate& tmpl) {
    ordered_json j;
    j["schema"] = kSchemaVersion;
    ordered_json roster = ordered_json::array();
    for (const auto& r : tmpl.roster) {
        ordered_json jr;
        jr["name"] = r.name;
        switch (r.role) {
            case Role::Manipulator: jr["role"] = "manipulator"; break;
            case Role::Movable: jr["role"] = "movable"; break;
            case Role::Reference: jr["role"] = "reference"; break;
            case Role::Distractor: jr["role"] = "distractor"; break;
        }
        jr["base_position"] = {r.base_position.x(), r.base_position.y(), r.base_position.z()};
        jr["jitter"] = r.position_jitter;
        roster.push_back(std::move(jr));
    }
    j["roster"] = std::move(roster);
    ordered_json script = ordered_json::array();
    for (const auto& p : tmpl.script) {
        ordered_json jp;
        switch (p.kind) {
            case PrimitiveKind::Approach: jp["kind"] = "approach"; break;
            case PrimitiveKind::Grasp: jp["kind"] = "grasp"; break;
            case PrimitiveKind::CarryTo: jp["kind"] = "carry_to"; break;
            case PrimitiveKind::Release: jp["kind"] = "release"; break;
            case PrimitiveKind::Retreat: jp["kind"] = "retreat"; break;
            case PrimitiveKind::Dwell: jp["kind"] = "dwell"; break;
            case PrimitiveKind::Bump: jp["kind"] = "bump"; break;
        }
        if (p.manipulator >= 0) jp["manipulator"] = p.manipulator;
        if (p.object >= 0) jp["object"] = p.object;
        if (p.reference >= 0) jp["reference"] = p.reference;
        jp["offset"] = {p.offset.x(), p.offset.y(), p.offset.z()};
        jp["offset_stddev"] = p.offset_stddev;
        jp["every_k_demos"] = p.every_k_demos;
        script.push_back(std::move(jp));
    }
    j["script"] = std::move(script);
    j["noise_pos"] = tmpl.noise_pos;
    j["noise_rot"] = tmpl.noise_rot;
    j["steps_per_primitive"] = tmpl.steps_per_primitive;
    j["feature_similarity"] = tmpl.feature_similarity;
    j["feature_dim"] = tmpl.feature_dim;
    ordered_json occ = ordered_json::array();
    for (const auto& o : tmpl.occlusions) {
        occ.push_back(ordered_json{{"object", o.object}, {"t0", o.t0}, {"t1", o.t1}});
    }
    j["occlusions"] = std::move(occ);
    return j;
}

void write_json(const std::filesystem::path& path, const ordered_json& j) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out << j.dump(2) << "\n";
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open file: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument("malformed JSON in " + path.string() + ": " + e.what());
    }
    check_schema(j);
    return j;
}

}  // namespace skelex
