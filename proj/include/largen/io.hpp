#pragma once

// Persistence: JSON-lines measurement streams, columnar summary tables and
// binary chain checkpoints (little-endian, fixed layout).

#include "largen/mcmc.hpp"

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace largen {

inline constexpr int kSchemaVersion = 1;
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct StreamRecord {
    std::string config_hash;
    std::string observable;
    std::uint64_t sweep = 0;
    double value = 0.0;
    std::optional<double> error;  // absent for raw per-trajectory values
    std::optional<double> n_eff;
};

std::string format_record(const StreamRecord& r);
// throws std::runtime_error on a malformed line or a schema mismatch
StreamRecord parse_record(const std::string& line);

// appends to a JSON-lines file; flushes on every record
class StreamWriter {
public:
    StreamWriter(const std::filesystem::path& path, std::string config_hash, bool append);
    ~StreamWriter();
    StreamWriter(const StreamWriter&) = delete;
    StreamWriter& operator=(const StreamWriter&) = delete;

    void write(const StreamRecord& r);
    void write(const MeasurementRecord& r);

private:
    std::filesystem::path path_;
    std::string hash_;
    std::FILE* file_;
};

std::vector<StreamRecord> read_stream(const std::filesystem::path& path);
// keep only records with sweep < limit (used before resuming)
void truncate_stream(const std::filesystem::path& path, std::uint64_t limit);

// whitespace-separated columns with '#' header lines carrying the config hash
struct Table {
    std::vector<std::string> header;  // metadata lines without the leading '#'
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
};
std::string format_table(const Table& t);
Table parse_table(const std::string& text);
void write_text(const std::filesystem::path& path, const std::string& text);  // via a temp file and rename
std::string read_text(const std::filesystem::path& path);
std::string format_number(double x);

struct Checkpoint {
    std::uint32_t format_version = kCheckpointVersion;
    std::uint64_t config_hash = 0;
    Scheme scheme = Scheme::LatticeTadpole;
    double reference_mass = 1.0;
    double mass = 1.0;
    ChainState state;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& c);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace largen
