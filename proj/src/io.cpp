#include "largen/io.hpp"

#include "largen/config.hpp"

#include <json.hpp>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace largen {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string format_record(const StreamRecord& r) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["config_hash"] = r.config_hash;
    j["observable"] = r.observable;
    j["sweep"] = r.sweep;
    j["value"] = std::isfinite(r.value) ? json(r.value) : json(std::to_string(r.value));
    j["error"] = r.error ? json(*r.error) : json(nullptr);
    j["n_eff"] = r.n_eff ? json(*r.n_eff) : json(nullptr);
    return j.dump();
}

StreamRecord parse_record(const std::string& line) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("malformed measurement record: ") + e.what());
    }
    if (!j.contains("schema_version") || j["schema_version"] != kSchemaVersion)
        throw std::runtime_error("measurement record has an unsupported schema_version");
    StreamRecord r;
    try {
        r.config_hash = j.at("config_hash").get<std::string>();
        r.observable = j.at("observable").get<std::string>();
        r.sweep = j.at("sweep").get<std::uint64_t>();
        const json& v = j.at("value");
        r.value = v.is_string() ? std::stod(v.get<std::string>()) : v.get<double>();
        if (!j.at("error").is_null()) r.error = j["error"].get<double>();
        if (!j.at("n_eff").is_null()) r.n_eff = j["n_eff"].get<double>();
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("measurement record is missing a field: ") + e.what());
    }
    return r;
}

StreamWriter::StreamWriter(const fs::path& path, std::string hash, bool append)
    : path_(path), hash_(std::move(hash)), file_(std::fopen(path.c_str(), append ? "a" : "w")) {
    if (!file_) throw std::runtime_error("cannot open measurement stream '" + path.string() + "'");
}

StreamWriter::~StreamWriter() {
    if (file_) std::fclose(file_);
}

void StreamWriter::write(const StreamRecord& r) {
    const std::string s = format_record(r) + "\n";
    if (std::fwrite(s.data(), 1, s.size(), file_) != s.size() || std::fflush(file_) != 0)
        throw std::runtime_error("write to '" + path_.string() + "' failed");
}

void StreamWriter::write(const MeasurementRecord& r) { write(StreamRecord{hash_, r.observable, r.sweep, r.value, {}, {}}); }

std::vector<StreamRecord> read_stream(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read measurement stream '" + path.string() + "'");
    std::vector<StreamRecord> out;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) out.push_back(parse_record(line));
    return out;
}

void truncate_stream(const fs::path& path, std::uint64_t limit) {
    if (!fs::exists(path)) return;
    std::ifstream in(path);
    std::string line, kept;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        // a torn last line from an interrupted run is dropped
        try {
            if (parse_record(line).sweep < limit) kept += line + "\n";
        } catch (const std::runtime_error&) {
        }
    }
    in.close();
    write_text(path, kept);
}

std::string format_number(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

std::string format_table(const Table& t) {
    std::string out;
    for (const std::string& h : t.header) out += "# " + h + "\n";
    std::vector<size_t> width(t.columns.size());
    for (size_t c = 0; c < t.columns.size(); ++c) {
        width[c] = t.columns[c].size();
        for (const auto& r : t.rows)
            if (c < r.size()) width[c] = std::max(width[c], r[c].size());
    }
    const auto line = [&](const std::vector<std::string>& cells) {
        std::string s;
        for (size_t c = 0; c < cells.size(); ++c) {
            s += cells[c];
            if (c + 1 < cells.size()) s += std::string(width[c] - cells[c].size() + 2, ' ');
        }
        return s + "\n";
    };
    out += line(t.columns);
    for (const auto& r : t.rows) out += line(r);
    return out;
}

Table parse_table(const std::string& text) {
    Table t;
    std::istringstream in(text);
    std::string line;
    bool have_columns = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            t.header.push_back(line.size() > 2 ? line.substr(2) : "");
            continue;
        }
        std::istringstream ls(line);
        std::vector<std::string> cells;
        std::string cell;
        while (ls >> cell) cells.push_back(cell);
        if (!have_columns) {
            t.columns = cells;
            have_columns = true;
        } else {
            t.rows.push_back(cells);
        }
    }
    return t;
}

void write_text(const fs::path& path, const std::string& text) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
        out << text;
        if (!out) throw std::runtime_error("write to '" + tmp.string() + "' failed");
    }
    fs::rename(tmp, path);
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

namespace {

constexpr char kMagic[8] = {'L', 'G', 'N', 'C', 'K', 'P', 'T', '1'};

class Writer {
public:
    template <class T>
    void put(T v) {
        using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
        const U u = std::bit_cast<U>(v);
        for (size_t i = 0; i < sizeof(U); ++i) bytes.push_back(std::uint8_t(u >> (8 * i)));
    }
    std::vector<std::uint8_t> bytes;
};

class Reader {
public:
    explicit Reader(const std::vector<std::uint8_t>& b) : b_(b) {}
    template <class T>
    T get() {
        using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
        if (pos_ + sizeof(U) > b_.size()) throw std::runtime_error("checkpoint is truncated");
        U u = 0;
        for (size_t i = 0; i < sizeof(U); ++i) u |= U(b_[pos_ + i]) << (8 * i);
        pos_ += sizeof(U);
        return std::bit_cast<T>(u);
    }
    size_t pos() const { return pos_; }
    void skip(size_t k) { pos_ += k; }

private:
    const std::vector<std::uint8_t>& b_;
    size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& c) {
    const ChainState& s = c.state;
    Writer w;
    w.bytes.assign(kMagic, kMagic + 8);
    w.put<std::uint32_t>(c.format_version);
    w.put<std::uint64_t>(c.config_hash);
    w.put<double>(s.field.torus.side());
    w.put<std::uint32_t>(std::uint32_t(s.field.torus.points()));
    w.put<std::uint32_t>(std::uint32_t(s.field.components()));
    w.put<std::uint32_t>(std::uint32_t(c.scheme));
    w.put<double>(c.reference_mass);
    w.put<double>(c.mass);
    w.put<std::uint64_t>(s.seed);
    w.put<std::uint64_t>(s.chain);
    w.put<std::uint64_t>(s.sweep);
    w.put<double>(s.step_size);
    w.put<std::uint32_t>(std::uint32_t(s.trajectory_steps));
    for (std::uint64_t v : {s.acceptance.proposed, s.acceptance.accepted, s.acceptance.window_proposed,
                            s.acceptance.window_accepted, s.acceptance.nonfinite})
        w.put<std::uint64_t>(v);
    w.put<std::uint64_t>(std::uint64_t(s.field.values.size()));
    for (Eigen::Index i = 0; i < s.field.values.size(); ++i) w.put<double>(s.field.values(i));
    w.put<std::uint64_t>(fnv1a(std::string(w.bytes.begin(), w.bytes.end())));
    return w.bytes;
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 8) != 0)
        throw std::runtime_error("not a checkpoint file (bad magic)");
    const std::uint64_t stored = [&] {
        std::uint64_t u = 0;
        for (size_t i = 0; i < 8; ++i) u |= std::uint64_t(bytes[bytes.size() - 8 + i]) << (8 * i);
        return u;
    }();
    if (stored != fnv1a(std::string(bytes.begin(), bytes.end() - 8)))
        throw std::runtime_error("checkpoint checksum mismatch");
    Reader r(bytes);
    r.skip(8);
    const std::uint32_t version = r.get<std::uint32_t>();
    if (version != kCheckpointVersion)
        throw std::runtime_error("unsupported checkpoint format version " + std::to_string(version));
    const std::uint64_t hash = r.get<std::uint64_t>();
    const double L = r.get<double>();
    const int n = int(r.get<std::uint32_t>());
    const int N = int(r.get<std::uint32_t>());
    const std::uint32_t tag = r.get<std::uint32_t>();
    if (tag > 1) throw std::runtime_error("checkpoint has an unknown counterterm scheme");
    const double reference_mass = r.get<double>();
    const double mass = r.get<double>();
    ChainState s{FieldConfig(Torus(L, n), N), 0.0, 0, {}, 0, 0, 0};
    s.seed = r.get<std::uint64_t>();
    s.chain = r.get<std::uint64_t>();
    s.sweep = r.get<std::uint64_t>();
    s.step_size = r.get<double>();
    s.trajectory_steps = int(r.get<std::uint32_t>());
    s.acceptance.proposed = r.get<std::uint64_t>();
    s.acceptance.accepted = r.get<std::uint64_t>();
    s.acceptance.window_proposed = r.get<std::uint64_t>();
    s.acceptance.window_accepted = r.get<std::uint64_t>();
    s.acceptance.nonfinite = r.get<std::uint64_t>();
    const std::uint64_t count = r.get<std::uint64_t>();
    if (count != std::uint64_t(s.field.values.size())) throw std::runtime_error("checkpoint field size mismatch");
    for (Eigen::Index i = 0; i < s.field.values.size(); ++i) s.field.values(i) = r.get<double>();
    if (r.pos() + 8 != bytes.size()) throw std::runtime_error("checkpoint has trailing bytes");
    s.field.meta = {Scheme(tag), reference_mass, mass,
                    "mcmc:exp=" + std::to_string(s.seed) + ",chain=" + std::to_string(s.chain) +
                        ",sweep=" + std::to_string(s.sweep)};
    return Checkpoint{version, hash, Scheme(tag), reference_mass, mass, std::move(s)};
}

void save_checkpoint(const fs::path& path, const Checkpoint& c) {
    const auto b = encode_checkpoint(c);
    write_text(path, std::string(b.begin(), b.end()));
}

Checkpoint load_checkpoint(const fs::path& path) {
    const std::string s = read_text(path);
    return decode_checkpoint(std::vector<std::uint8_t>(s.begin(), s.end()));
}

}  // namespace largen
