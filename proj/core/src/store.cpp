#include "hsaw/store.hpp"

#include <bit>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "hsaw/gan.hpp"

namespace hsaw::store {

namespace {

constexpr char kMagic[4] = {'H', 'S', 'A', 'W'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 24));
}

std::uint32_t get_u32(const std::vector<std::uint8_t>& b, std::size_t& off, const std::string& origin) {
    if (off + 4 > b.size()) throw std::runtime_error(origin + ": truncated header");
    const std::uint32_t v = static_cast<std::uint32_t>(b[off]) |
                            static_cast<std::uint32_t>(b[off + 1]) << 8 |
                            static_cast<std::uint32_t>(b[off + 2]) << 16 |
                            static_cast<std::uint32_t>(b[off + 3]) << 24;
    off += 4;
    return v;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + file.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return bytes;
}

void write_file(const std::filesystem::path& file, const void* data, std::size_t size) {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + file.string());
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
    if (!out) throw std::runtime_error("short write to " + file.string());
}

std::string fmt_float(float v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(v));
    return buf;
}

std::string fmt_double(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// manifest accessors: every lookup failure names the key and the file
class Manifest {
public:
    Manifest(std::map<std::string, std::string> kv, std::string origin)
        : kv_(std::move(kv)), origin_(std::move(origin)) {}

    const std::string& str(const std::string& key) const {
        auto it = kv_.find(key);
        if (it == kv_.end()) throw std::runtime_error(origin_ + ": manifest is missing key " + key);
        return it->second;
    }
    long long integer(const std::string& key) const {
        return std::stoll(str(key));
    }
    std::uint64_t u64(const std::string& key) const {
        return std::stoull(str(key));
    }
    float f32(const std::string& key) const {
        return std::stof(str(key));
    }
    double f64(const std::string& key) const {
        return std::stod(str(key));
    }

private:
    std::map<std::string, std::string> kv_;
    std::string origin_;
};

Manifest load_manifest(const std::filesystem::path& file) {
    const std::vector<std::uint8_t> bytes = read_file(file);
    return {parse_config(std::string(bytes.begin(), bytes.end())), file.string()};
}

template <typename T>
std::string join_csv(const std::vector<T>& xs, std::string (*fmt)(T)) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) out += ',';
        out += fmt(xs[i]);
    }
    return out;
}

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(s);
    while (std::getline(in, cell, ',')) out.push_back(cell);
    return out;
}

}  // namespace

std::vector<std::uint8_t> encode_blob(const std::string& name, const nn::Tensor& t) {
    if (!t.defined()) throw std::invalid_argument("encode_blob: undefined tensor '" + name + "'");
    std::vector<std::uint8_t> out;
    out.reserve(20 + name.size() + static_cast<std::size_t>(t.numel()) * 4);
    out.insert(out.end(), kMagic, kMagic + 4);
    put_u32(out, kFormatVersion);
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put_u32(out, static_cast<std::uint32_t>(t.ndim()));
    for (int d : t.shape()) put_u32(out, static_cast<std::uint32_t>(d));
    for (std::int64_t i = 0; i < t.numel(); ++i) {
        put_u32(out, std::bit_cast<std::uint32_t>(t[i]));
    }
    return out;
}

NamedTensor decode_blob(const std::vector<std::uint8_t>& bytes, const std::string& origin) {
    std::size_t off = 0;
    if (bytes.size() < 4 || !std::equal(kMagic, kMagic + 4, bytes.begin())) {
        throw std::runtime_error(origin + ": bad magic, not a HSAW tensor blob");
    }
    off = 4;
    const std::uint32_t version = get_u32(bytes, off, origin);
    if (version != kFormatVersion) {
        throw std::runtime_error(origin + ": format version " + std::to_string(version) +
                                 " is not supported by this build (expected " +
                                 std::to_string(kFormatVersion) + "); re-save with a matching build");
    }
    const std::uint32_t name_len = get_u32(bytes, off, origin);
    if (off + name_len > bytes.size()) throw std::runtime_error(origin + ": truncated name");
    NamedTensor nt;
    nt.name.assign(bytes.begin() + static_cast<std::ptrdiff_t>(off),
                   bytes.begin() + static_cast<std::ptrdiff_t>(off + name_len));
    off += name_len;
    const std::uint32_t ndim = get_u32(bytes, off, origin);
    if (ndim == 0 || ndim > 8) {
        throw std::runtime_error(origin + ": implausible rank " + std::to_string(ndim));
    }
    std::vector<int> shape(ndim);
    std::int64_t numel = 1;
    for (std::uint32_t i = 0; i < ndim; ++i) {
        shape[i] = static_cast<int>(get_u32(bytes, off, origin));
        if (shape[i] <= 0) throw std::runtime_error(origin + ": non-positive dimension");
        numel *= shape[i];
    }
    if (bytes.size() - off != static_cast<std::size_t>(numel) * 4) {
        throw std::runtime_error(origin + ": payload length mismatch, header promises " +
                                 std::to_string(numel * 4) + " bytes but " +
                                 std::to_string(bytes.size() - off) + " follow");
    }
    std::vector<float> values(static_cast<std::size_t>(numel));
    for (std::int64_t i = 0; i < numel; ++i) {
        values[static_cast<std::size_t>(i)] = std::bit_cast<float>(get_u32(bytes, off, origin));
    }
    nt.tensor = nn::Tensor(std::move(shape), std::move(values));
    return nt;
}

void save_blob(const std::filesystem::path& file, const std::string& name, const nn::Tensor& t) {
    const std::vector<std::uint8_t> bytes = encode_blob(name, t);
    write_file(file, bytes.data(), bytes.size());
}

NamedTensor load_blob(const std::filesystem::path& file) {
    return decode_blob(read_file(file), file.string());
}

std::map<std::string, std::string> parse_config(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    auto trim = [](std::string s) {
        const std::size_t a = s.find_first_not_of(" \t\r");
        const std::size_t b = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error("config line " + std::to_string(line_no) +
                                     ": expected key=value, got '" + line + "'");
        }
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) {
            throw std::runtime_error("config line " + std::to_string(line_no) + ": empty key");
        }
        kv[key] = trim(line.substr(eq + 1));
    }
    return kv;
}

std::map<std::string, std::string> load_config(const std::filesystem::path& file) {
    const std::vector<std::uint8_t> bytes = read_file(file);
    return parse_config(std::string(bytes.begin(), bytes.end()));
}

void save_dataset(const std::filesystem::path& dir, const scene::Sequence& seq) {
    if (seq.size() < 1) throw std::invalid_argument("save_dataset: empty sequence");
    const int n = seq.size();
    const int h = seq.config.height, w = seq.config.width;
    nn::Tensor frames({n, 1, h, w});
    nn::Tensor flows({n, 2, h, w});
    std::vector<std::uint8_t> labels(static_cast<std::size_t>(n));
    const std::int64_t frame_len = static_cast<std::int64_t>(h) * w;
    for (int i = 0; i < n; ++i) {
        const scene::FrameMotionCouple& c = seq.couples[static_cast<std::size_t>(i)];
        if (c.frame.shape() != std::vector<int>{1, h, w} ||
            c.flow.shape() != std::vector<int>{2, h, w}) {
            throw std::invalid_argument("save_dataset: couple " + std::to_string(i) +
                                        " shape disagrees with the manifest size");
        }
        std::copy_n(c.frame.data(), frame_len, frames.data() + i * frame_len);
        std::copy_n(c.flow.data(), 2 * frame_len, flows.data() + i * 2 * frame_len);
        labels[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(seq.labels[static_cast<std::size_t>(i)]);
    }

    std::filesystem::create_directories(dir);
    std::string m;
    m += "format_version=" + std::to_string(kFormatVersion) + "\n";
    m += "frames=" + std::to_string(n) + "\n";
    m += "scenario=" + std::to_string(seq.config.scenario) + "\n";
    m += "frames_per_segment=" + std::to_string(seq.config.frames_per_segment) + "\n";
    m += "laps=" + std::to_string(seq.config.laps) + "\n";
    m += "height=" + std::to_string(h) + "\n";
    m += "width=" + std::to_string(w) + "\n";
    m += "pedestrian_segment=" + std::to_string(seq.config.pedestrian_segment) + "\n";
    m += "noise_sigma=" + fmt_float(seq.config.noise_sigma) + "\n";
    m += "seed=" + std::to_string(seq.config.seed) + "\n";
    m += "max_flow_speed=" + fmt_float(seq.max_flow_speed) + "\n";
    m += "episode_begin=" + std::to_string(seq.episode_begin) + "\n";
    m += "episode_end=" + std::to_string(seq.episode_end) + "\n";
    write_file(dir / "manifest.txt", m.data(), m.size());
    save_blob(dir / "frames.blob", "frames", frames);
    save_blob(dir / "flows.blob", "flows", flows);
    write_file(dir / "labels.bin", labels.data(), labels.size());
}

scene::Sequence load_dataset(const std::filesystem::path& dir) {
    const Manifest m = load_manifest(dir / "manifest.txt");
    const std::uint32_t version = static_cast<std::uint32_t>(m.integer("format_version"));
    if (version != kFormatVersion) {
        throw std::runtime_error(dir.string() + ": dataset format version " + std::to_string(version) +
                                 " is not supported by this build (expected " +
                                 std::to_string(kFormatVersion) + "); re-save with a matching build");
    }
    scene::Sequence seq;
    const int n = static_cast<int>(m.integer("frames"));
    seq.config.scenario = static_cast<int>(m.integer("scenario"));
    seq.config.frames_per_segment = static_cast<int>(m.integer("frames_per_segment"));
    seq.config.laps = static_cast<int>(m.integer("laps"));
    seq.config.height = static_cast<int>(m.integer("height"));
    seq.config.width = static_cast<int>(m.integer("width"));
    seq.config.pedestrian_segment = static_cast<int>(m.integer("pedestrian_segment"));
    seq.config.noise_sigma = m.f32("noise_sigma");
    seq.config.seed = m.u64("seed");
    seq.max_flow_speed = m.f32("max_flow_speed");
    seq.episode_begin = static_cast<int>(m.integer("episode_begin"));
    seq.episode_end = static_cast<int>(m.integer("episode_end"));
    const int h = seq.config.height, w = seq.config.width;
    if (n < 1) throw std::runtime_error(dir.string() + ": manifest frame count must be positive");

    const NamedTensor frames = load_blob(dir / "frames.blob");
    const NamedTensor flows = load_blob(dir / "flows.blob");
    if (frames.tensor.shape() != std::vector<int>{n, 1, h, w}) {
        throw std::runtime_error(dir.string() + ": frames.blob shape " + frames.tensor.shape_str() +
                                 " disagrees with the manifest (" + std::to_string(n) + " frames of 1x" +
                                 std::to_string(h) + "x" + std::to_string(w) + ")");
    }
    if (flows.tensor.shape() != std::vector<int>{n, 2, h, w}) {
        throw std::runtime_error(dir.string() + ": flows.blob shape " + flows.tensor.shape_str() +
                                 " disagrees with the manifest (" + std::to_string(n) + " flows of 2x" +
                                 std::to_string(h) + "x" + std::to_string(w) + ")");
    }
    const std::vector<std::uint8_t> labels = read_file(dir / "labels.bin");
    if (labels.size() != static_cast<std::size_t>(n)) {
        throw std::runtime_error(dir.string() + ": labels.bin holds " + std::to_string(labels.size()) +
                                 " labels for " + std::to_string(n) + " frames");
    }

    const std::int64_t frame_len = static_cast<std::int64_t>(h) * w;
    seq.couples.resize(static_cast<std::size_t>(n));
    seq.labels.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        if (labels[static_cast<std::size_t>(i)] > 2) {
            throw std::runtime_error(dir.string() + ": labels.bin contains invalid label " +
                                     std::to_string(labels[static_cast<std::size_t>(i)]) + " at index " +
                                     std::to_string(i));
        }
        scene::FrameMotionCouple& c = seq.couples[static_cast<std::size_t>(i)];
        c.index = i;
        c.frame = nn::Tensor({1, h, w});
        c.flow = nn::Tensor({2, h, w});
        std::copy_n(frames.tensor.data() + i * frame_len, frame_len, c.frame.data());
        std::copy_n(flows.tensor.data() + i * 2 * frame_len, 2 * frame_len, c.flow.data());
        seq.labels[static_cast<std::size_t>(i)] = static_cast<scene::ActivityLabel>(labels[static_cast<std::size_t>(i)]);
    }
    return seq;
}

namespace {

std::string train_config_text(const std::string& prefix, const gan::TrainConfig& t) {
    std::string m;
    m += prefix + ".epochs=" + std::to_string(t.epochs) + "\n";
    m += prefix + ".batch_size=" + std::to_string(t.batch_size) + "\n";
    m += prefix + ".lambda_l1=" + fmt_float(t.lambda_l1) + "\n";
    m += prefix + ".lr=" + fmt_float(t.adam.lr) + "\n";
    m += prefix + ".beta1=" + fmt_float(t.adam.beta1) + "\n";
    m += prefix + ".beta2=" + fmt_float(t.adam.beta2) + "\n";
    m += prefix + ".epsilon=" + fmt_float(t.adam.epsilon) + "\n";
    m += prefix + ".seed=" + std::to_string(t.seed) + "\n";
    m += prefix + ".max_flow_speed=" + fmt_float(t.max_flow_speed) + "\n";
    return m;
}

gan::TrainConfig train_config_from(const Manifest& m, const std::string& prefix) {
    gan::TrainConfig t;
    t.epochs = static_cast<int>(m.integer(prefix + ".epochs"));
    t.batch_size = static_cast<int>(m.integer(prefix + ".batch_size"));
    t.lambda_l1 = m.f32(prefix + ".lambda_l1");
    t.adam.lr = m.f32(prefix + ".lr");
    t.adam.beta1 = m.f32(prefix + ".beta1");
    t.adam.beta2 = m.f32(prefix + ".beta2");
    t.adam.epsilon = m.f32(prefix + ".epsilon");
    t.seed = m.u64(prefix + ".seed");
    t.max_flow_speed = m.f32(prefix + ".max_flow_speed");
    return t;
}

std::string fmt_int(int v) { return std::to_string(v); }
std::string fmt_mask(char v) { return std::to_string(static_cast<int>(v)); }

}  // namespace

void save_model(const std::filesystem::path& dir, const hier::Hierarchy& h) {
    if (h.levels.empty()) throw std::invalid_argument("save_model: hierarchy has no levels");
    std::filesystem::create_directories(dir);

    std::string m;
    m += "format_version=" + std::to_string(kFormatVersion) + "\n";
    m += "levels=" + std::to_string(h.levels.size()) + "\n";
    m += "final_threshold=" + fmt_float(h.final_threshold) + "\n";
    m += std::string("config.theta.mode=") +
         (h.config.theta.mode == hier::ThetaPolicy::Mode::Fixed ? "fixed" : "auto") + "\n";
    m += "config.theta.fixed=" + fmt_float(h.config.theta.fixed_theta) + "\n";
    m += "config.theta.k=" + fmt_float(h.config.theta.k) + "\n";
    m += "config.max_levels=" + std::to_string(h.config.max_levels) + "\n";
    m += "config.min_cluster_frac=" + fmt_float(h.config.min_cluster_frac) + "\n";
    m += "config.seed=" + std::to_string(h.config.seed) + "\n";
    m += train_config_text("config.train", h.config.train);
    m += "config.som.rows=" + std::to_string(h.config.som_train.rows) + "\n";
    m += "config.som.cols=" + std::to_string(h.config.som_train.cols) + "\n";
    m += "config.som.epochs=" + std::to_string(h.config.som_train.epochs) + "\n";
    m += "config.som.alpha0=" + fmt_float(h.config.som_train.alpha0) + "\n";
    m += "config.som.sigma0=" + fmt_float(h.config.som_train.sigma0) + "\n";
    m += "config.som.seed=" + std::to_string(h.config.som_train.seed) + "\n";

    for (const hier::HierarchyLevel& level : h.levels) {
        const std::string p = "level" + std::to_string(level.level);
        const std::filesystem::path level_dir = dir / p;
        std::filesystem::create_directories(level_dir);

        m += p + ".theta=" + fmt_float(level.theta) + "\n";
        m += p + ".fingerprint=" + std::to_string(level.subset_fingerprint) + "\n";
        m += p + ".subset=" + join_csv(level.subset, fmt_int) + "\n";
        m += p + ".normal_mask=" + join_csv(level.normal_mask, fmt_mask) + "\n";
        std::vector<double> mus;
        std::vector<int> counts;
        for (const hier::ClusterStat& s : level.cluster_stats) {
            mus.push_back(s.mu);
            counts.push_back(s.count);
        }
        m += p + ".cluster_mu=" + join_csv(mus, fmt_double) + "\n";
        m += p + ".cluster_count=" + join_csv(counts, fmt_int) + "\n";
        m += p + ".som.rows=" + std::to_string(level.som.rows) + "\n";
        m += p + ".som.cols=" + std::to_string(level.som.cols) + "\n";
        m += p + ".som.dim=" + std::to_string(level.som.dim) + "\n";
        m += train_config_text(p + ".train", level.pair.meta.config);

        nn::Tensor protos({level.som.size(), level.som.dim});
        for (int u = 0; u < level.som.size(); ++u) {
            std::copy_n(level.som.prototypes[static_cast<std::size_t>(u)].data(), level.som.dim,
                        protos.data() + static_cast<std::int64_t>(u) * level.som.dim);
        }
        save_blob(level_dir / "som.blob", p + ".som", protos);

        std::string names;
        for (const nn::Parameter* param : level.pair.parameters()) {
            if (!names.empty()) names += ',';
            names += param->name();
            save_blob(level_dir / (param->name() + ".blob"), param->name(), param->value());
        }
        m += p + ".params=" + names + "\n";
    }
    write_file(dir / "manifest.txt", m.data(), m.size());
}

hier::Hierarchy load_model(const std::filesystem::path& dir) {
    const Manifest m = load_manifest(dir / "manifest.txt");
    const std::uint32_t version = static_cast<std::uint32_t>(m.integer("format_version"));
    if (version != kFormatVersion) {
        throw std::runtime_error(dir.string() + ": model format version " + std::to_string(version) +
                                 " is not supported by this build (expected " +
                                 std::to_string(kFormatVersion) + "); re-save with a matching build");
    }

    hier::Hierarchy h;
    h.final_threshold = m.f32("final_threshold");
    const std::string mode = m.str("config.theta.mode");
    if (mode == "fixed") h.config.theta.mode = hier::ThetaPolicy::Mode::Fixed;
    else if (mode == "auto") h.config.theta.mode = hier::ThetaPolicy::Mode::Auto;
    else throw std::runtime_error(dir.string() + ": unknown theta mode '" + mode + "'");
    h.config.theta.fixed_theta = m.f32("config.theta.fixed");
    h.config.theta.k = m.f32("config.theta.k");
    h.config.max_levels = static_cast<int>(m.integer("config.max_levels"));
    h.config.min_cluster_frac = m.f32("config.min_cluster_frac");
    h.config.seed = m.u64("config.seed");
    h.config.train = train_config_from(m, "config.train");
    h.config.som_train.rows = static_cast<int>(m.integer("config.som.rows"));
    h.config.som_train.cols = static_cast<int>(m.integer("config.som.cols"));
    h.config.som_train.epochs = static_cast<int>(m.integer("config.som.epochs"));
    h.config.som_train.alpha0 = m.f32("config.som.alpha0");
    h.config.som_train.sigma0 = m.f32("config.som.sigma0");
    h.config.som_train.seed = m.u64("config.som.seed");

    const int levels = static_cast<int>(m.integer("levels"));
    if (levels < 1) throw std::runtime_error(dir.string() + ": model has no levels");
    for (int l = 0; l < levels; ++l) {
        const std::string p = "level" + std::to_string(l);
        const std::filesystem::path level_dir = dir / p;
        hier::HierarchyLevel level;
        level.level = l;
        level.theta = m.f32(p + ".theta");
        level.subset_fingerprint = m.u64(p + ".fingerprint");
        for (const std::string& cell : split_csv(m.str(p + ".subset"))) {
            level.subset.push_back(std::stoi(cell));
        }
        for (const std::string& cell : split_csv(m.str(p + ".normal_mask"))) {
            level.normal_mask.push_back(static_cast<char>(std::stoi(cell)));
        }
        const std::vector<std::string> mus = split_csv(m.str(p + ".cluster_mu"));
        const std::vector<std::string> counts = split_csv(m.str(p + ".cluster_count"));
        if (mus.size() != counts.size() || mus.size() != level.normal_mask.size()) {
            throw std::runtime_error(dir.string() + ": " + p + " cluster stat lists disagree in length");
        }
        for (std::size_t i = 0; i < mus.size(); ++i) {
            level.cluster_stats.push_back({std::stod(mus[i]), std::stoi(counts[i])});
        }

        level.som.rows = static_cast<int>(m.integer(p + ".som.rows"));
        level.som.cols = static_cast<int>(m.integer(p + ".som.cols"));
        level.som.dim = static_cast<int>(m.integer(p + ".som.dim"));
        const NamedTensor protos = load_blob(level_dir / "som.blob");
        if (protos.tensor.shape() != std::vector<int>{level.som.size(), level.som.dim}) {
            throw std::runtime_error(dir.string() + ": " + p + " SOM prototype blob shape " +
                                     protos.tensor.shape_str() + " disagrees with the manifest grid");
        }
        if (static_cast<std::size_t>(level.som.size()) != level.normal_mask.size()) {
            throw std::runtime_error(dir.string() + ": " + p + " normal mask length does not match the SOM grid");
        }
        level.som.prototypes.resize(static_cast<std::size_t>(level.som.size()));
        for (int u = 0; u < level.som.size(); ++u) {
            level.som.prototypes[static_cast<std::size_t>(u)].assign(
                protos.tensor.data() + static_cast<std::int64_t>(u) * level.som.dim,
                protos.tensor.data() + static_cast<std::int64_t>(u + 1) * level.som.dim);
        }
        level.som.trained = true;

        const gan::TrainConfig tc = train_config_from(m, p + ".train");
        level.pair.fo.g = gan::make_generator(gan::Direction::FrameToFlow, 0);
        level.pair.fo.d = gan::make_discriminator(gan::Direction::FrameToFlow, 0);
        level.pair.of.g = gan::make_generator(gan::Direction::FlowToFrame, 0);
        level.pair.of.d = gan::make_discriminator(gan::Direction::FlowToFrame, 0);
        level.pair.meta.config = tc;
        level.pair.meta.subset_fingerprint = level.subset_fingerprint;
        level.pair.meta.subset_size = static_cast<int>(level.subset.size());

        for (const std::string& name : split_csv(m.str(p + ".params"))) {
            const std::filesystem::path blob_file = level_dir / (name + ".blob");
            if (!std::filesystem::exists(blob_file)) {
                throw std::runtime_error(dir.string() + ": missing checkpoint blob for parameter " + name);
            }
            const NamedTensor nt = load_blob(blob_file);
            nn::Parameter* target = nullptr;
            for (nn::Parameter* param : level.pair.parameters()) {
                if (param->name() == name) {
                    target = param;
                    break;
                }
            }
            if (!target) {
                throw std::runtime_error(dir.string() + ": manifest parameter " + name +
                                         " does not exist in the network architecture");
            }
            if (target->value().shape() != nt.tensor.shape()) {
                throw std::runtime_error(dir.string() + ": parameter " + name + " has shape " +
                                         nt.tensor.shape_str() + " on disk but the architecture expects " +
                                         target->value().shape_str());
            }
            target->value() = nt.tensor;
        }
        h.levels.push_back(std::move(level));
    }
    return h;
}

}  // namespace hsaw::store
