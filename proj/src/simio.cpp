#include <lieodom/simio.hpp>

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace lieodom::simio {

using nlohmann::json;

namespace {

json vec_to_json(const Eigen::Ref<const Eigen::VectorXd>& v) {
    json arr = json::array();
    for (int i = 0; i < v.size(); ++i) arr.push_back(v(i));
    return arr;
}

void json_to_vec(const json& arr, Eigen::Ref<Eigen::VectorXd> v) {
    if (!arr.is_array() || static_cast<int>(arr.size()) != v.size())
        throw std::runtime_error("array size mismatch");
    for (int i = 0; i < v.size(); ++i) v(i) = arr[i].get<double>();
}

json mat3_to_json(const Mat3& m) {
    json arr = json::array();
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) arr.push_back(m(r, c));
    return arr;
}

Mat3 json_to_mat3(const json& arr) {
    if (!arr.is_array() || arr.size() != 9) throw std::runtime_error("expected 9 entries");
    Mat3 m;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) m(r, c) = arr[3 * r + c].get<double>();
    return m;
}

json sensor_to_json(const SensorRecord& s) {
    json j;
    j["r"] = "s";
    j["t"] = s.t;
    j["w"] = vec_to_json(s.omega_meas);
    j["a"] = vec_to_json(s.accel_meas);
    j["q"] = vec_to_json(s.q);
    j["dq"] = vec_to_json(s.dq);
    Eigen::VectorXd fp(12), fv(12);
    for (int f = 0; f < 4; ++f) {
        fp.segment<3>(3 * f) = s.foot_pos[f];
        fv.segment<3>(3 * f) = s.foot_vel[f];
    }
    j["fp"] = vec_to_json(fp);
    j["fv"] = vec_to_json(fv);
    json c = json::array();
    for (bool b : s.contact) c.push_back(b ? 1 : 0);
    j["c"] = c;
    j["fn"] = vec_to_json(s.normal_force);
    j["tau"] = vec_to_json(s.tau);
    j["gt"] = vec_to_json(s.gravity_torque);
    return j;
}

SensorRecord json_to_sensor(const json& j) {
    SensorRecord s;
    s.t = j.at("t").get<double>();
    json_to_vec(j.at("w"), s.omega_meas);
    json_to_vec(j.at("a"), s.accel_meas);
    json_to_vec(j.at("q"), s.q);
    json_to_vec(j.at("dq"), s.dq);
    Eigen::VectorXd fp(12), fv(12);
    json_to_vec(j.at("fp"), fp);
    json_to_vec(j.at("fv"), fv);
    for (int f = 0; f < 4; ++f) {
        s.foot_pos[f] = fp.segment<3>(3 * f);
        s.foot_vel[f] = fv.segment<3>(3 * f);
    }
    const json& c = j.at("c");
    if (!c.is_array() || c.size() != 4) throw std::runtime_error("contact array size");
    for (int f = 0; f < 4; ++f) s.contact[f] = c[f].get<int>() != 0;
    json_to_vec(j.at("fn"), s.normal_force);
    json_to_vec(j.at("tau"), s.tau);
    json_to_vec(j.at("gt"), s.gravity_torque);
    return s;
}

json truth_to_json(const TruthRecord& x) {
    json j;
    j["r"] = "x";
    j["t"] = x.t;
    j["R"] = mat3_to_json(x.X.R);
    j["v"] = vec_to_json(x.X.v);
    j["p"] = vec_to_json(x.X.p);
    return j;
}

TruthRecord json_to_truth(const json& j) {
    TruthRecord x;
    x.t = j.at("t").get<double>();
    x.X.R = json_to_mat3(j.at("R"));
    Eigen::VectorXd v(3), p(3);
    json_to_vec(j.at("v"), v);
    json_to_vec(j.at("p"), p);
    x.X.v = v;
    x.X.p = p;
    return x;
}

json geometry_to_json(const kin::RobotGeometry& g) {
    json j;
    j["hip_x"] = g.hip_x;
    j["hip_y"] = g.hip_y;
    j["abd_offset"] = g.abd_offset;
    j["thigh_length"] = g.thigh_length;
    j["calf_length"] = g.calf_length;
    j["mass"] = g.mass;
    return j;
}

kin::RobotGeometry json_to_geometry(const json& j) {
    kin::RobotGeometry g;
    g.hip_x = j.at("hip_x").get<double>();
    g.hip_y = j.at("hip_y").get<double>();
    g.abd_offset = j.at("abd_offset").get<double>();
    g.thigh_length = j.at("thigh_length").get<double>();
    g.calf_length = j.at("calf_length").get<double>();
    g.mass = j.at("mass").get<double>();
    return g;
}

json header_json(const DatasetMeta& meta, size_t n_sensors, size_t n_truth,
                 const std::string& kind) {
    json j;
    j["r"] = "h";
    j["schema"] = meta.schema;
    j["kind"] = kind;
    j["seed"] = meta.seed;
    j["rate"] = meta.rate;
    j["count_s"] = n_sensors;
    j["count_x"] = n_truth;
    j["geometry"] = geometry_to_json(meta.geometry);
    j["gravity"] = vec_to_json(meta.gravity);
    j["frames"] = meta.frames;
    j["terrain"] = meta.terrain;
    return j;
}

}  // namespace

bool SensorRecord::allFinite() const {
    bool ok = std::isfinite(t) && omega_meas.allFinite() && accel_meas.allFinite()
        && q.allFinite() && dq.allFinite() && normal_force.allFinite() && tau.allFinite()
        && gravity_torque.allFinite();
    for (int f = 0; f < 4; ++f) ok = ok && foot_pos[f].allFinite() && foot_vel[f].allFinite();
    return ok;
}

void write_dataset(const std::string& path, const SensorSequence& sensors,
                   const Trajectory& truth, const DatasetMeta& meta) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path);
    out << header_json(meta, sensors.size(), truth.size(), "dataset").dump() << '\n';
    for (const auto& s : sensors) out << sensor_to_json(s).dump() << '\n';
    for (const auto& x : truth) out << truth_to_json(x).dump() << '\n';
    if (!out) throw DataError("write failed: " + path);
}

Dataset read_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open: " + path);

    Dataset ds;
    std::string line;
    int line_no = 0;

    auto parse_line = [&](const std::string& text) -> json {
        try {
            return json::parse(text);
        } catch (const json::exception& e) {
            throw CorruptRecord(line_no, e.what());
        }
    };

    if (!std::getline(in, line)) throw CorruptRecord(1, "missing header");
    ++line_no;
    const json header = parse_line(line);
    try {
        const int schema = header.at("schema").get<int>();
        if (schema > kSchemaVersion)
            throw SchemaVersionMismatch("dataset schema " + std::to_string(schema)
                                        + " is newer than supported "
                                        + std::to_string(kSchemaVersion));
        ds.meta.schema = schema;
        ds.meta.seed = header.at("seed").get<uint64_t>();
        ds.meta.rate = header.at("rate").get<double>();
        ds.meta.geometry = json_to_geometry(header.at("geometry"));
        Eigen::VectorXd gr(3);
        json_to_vec(header.at("gravity"), gr);
        ds.meta.gravity = gr;
        ds.meta.frames = header.value("frames", "");
        ds.meta.terrain = header.value("terrain", "");
    } catch (const SchemaVersionMismatch&) {
        throw;
    } catch (const std::exception& e) {
        throw CorruptRecord(line_no, std::string("bad header: ") + e.what());
    }
    const size_t count_s = header.value("count_s", size_t{0});
    const size_t count_x = header.value("count_x", size_t{0});

    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const json j = parse_line(line);
        try {
            const std::string kind = j.at("r").get<std::string>();
            if (kind == "s")
                ds.sensors.push_back(json_to_sensor(j));
            else if (kind == "x")
                ds.truth.push_back(json_to_truth(j));
            else
                throw std::runtime_error("unknown record tag '" + kind + "'");
        } catch (const std::exception& e) {
            throw CorruptRecord(line_no, e.what());
        }
    }
    if (ds.sensors.size() != count_s || ds.truth.size() != count_x)
        throw CorruptRecord(line_no + 1, "truncated file: expected "
                                + std::to_string(count_s) + "+" + std::to_string(count_x)
                                + " records, found " + std::to_string(ds.sensors.size()) + "+"
                                + std::to_string(ds.truth.size()));
    return ds;
}

void write_trajectory(const std::string& path, const Trajectory& traj) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path);
    DatasetMeta meta;
    out << header_json(meta, 0, traj.size(), "trajectory").dump() << '\n';
    for (const auto& x : traj) out << truth_to_json(x).dump() << '\n';
    if (!out) throw DataError("write failed: " + path);
}

Trajectory read_trajectory(const std::string& path) {
    Dataset ds = read_dataset(path);
    return ds.truth;
}

KeyValues KeyValues::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return from_string(buf.str());
}

KeyValues KeyValues::from_string(const std::string& text) {
    KeyValues kv;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            const auto b = s.find_last_not_of(" \t\r");
            return (a == std::string::npos) ? std::string() : s.substr(a, b - a + 1);
        };
        if (trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
        kv.values_[key] = value;
    }
    return kv;
}

double KeyValues::get_double(const std::string& key, double fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        size_t idx = 0;
        const double v = std::stod(it->second, &idx);
        if (idx != it->second.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': cannot parse '" + it->second + "' as number");
    }
}

int KeyValues::get_int(const std::string& key, int fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        size_t idx = 0;
        const int v = std::stoi(it->second, &idx);
        if (idx != it->second.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': cannot parse '" + it->second + "' as integer");
    }
}

bool KeyValues::get_bool(const std::string& key, bool fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    throw ConfigError("key '" + key + "': expected true/false");
}

std::string KeyValues::get_string(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    return (it == values_.end()) ? fallback : it->second;
}

Vec3 KeyValues::get_vec3(const std::string& key, const Vec3& fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::string s = it->second;
    std::replace(s.begin(), s.end(), ',', ' ');
    std::istringstream in(s);
    std::vector<double> vals;
    double v;
    while (in >> v) vals.push_back(v);
    if (vals.size() == 1) return Vec3::Constant(vals[0]);
    if (vals.size() == 3) return Vec3(vals[0], vals[1], vals[2]);
    throw ConfigError("key '" + key + "': expected 1 or 3 numbers");
}

}  // namespace lieodom::simio
