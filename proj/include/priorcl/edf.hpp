#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "priorcl/errors.hpp"
#include "priorcl/signal.hpp"

namespace priorcl {

// EDF recordings plus sidecar label CSVs. Parsing is strict and bounded: no
// allocation ever depends on header arithmetic that the byte count has not
// already confirmed, so arbitrary input can error but not crash.

struct EdfSignal {
    std::string label;        // 16 ascii
    std::string transducer;   // 80
    std::string dimension;    // 8
    double physical_min = 0.0;
    double physical_max = 0.0;
    int digital_min = 0;
    int digital_max = 0;
    std::string prefiltering; // 80
    std::size_t samples_per_record = 0;
    std::string reserved;     // 32
};

struct EdfHeader {
    std::string version;    // 8 ascii
    std::string patient;    // 80
    std::string recording;  // 80
    std::string start_date; // 8, dd.mm.yy
    std::string start_time; // 8, hh.mm.ss
    std::size_t header_bytes = 0;
    std::string reserved;   // 44
    std::size_t n_records = 0;
    double record_duration_s = 0.0;
    std::vector<EdfSignal> signals;

    std::size_t n_signals() const { return signals.size(); }
};

struct EdfFile {
    EdfHeader header;
    // Per signal, all records concatenated (de-interleaved), raw digital.
    std::vector<std::vector<std::int16_t>> digital;

    // physical = physical_min + (digital - digital_min) * span ratio
    std::vector<double> physical(std::size_t sig) const {
        if (sig >= digital.size()) throw DomainError("signal index out of range");
        const EdfSignal& s = header.signals[sig];
        const double scale = (s.physical_max - s.physical_min) /
                             (static_cast<double>(s.digital_max) - s.digital_min);
        std::vector<double> out;
        out.reserve(digital[sig].size());
        for (std::int16_t d : digital[sig])
            out.push_back(s.physical_min + (static_cast<double>(d) - s.digital_min) * scale);
        return out;
    }
};

namespace detail {

inline std::string rtrim(std::string_view s) {
    std::size_t end = s.size();
    while (end > 0 && (s[end - 1] == ' ' || s[end - 1] == '\0')) --end;
    return std::string(s.substr(0, end));
}

inline std::string trim(std::string_view s) {
    std::size_t begin = 0, end = s.size();
    while (begin < end && s[begin] == ' ') ++begin;
    while (end > begin && (s[end - 1] == ' ' || s[end - 1] == '\0')) --end;
    return std::string(s.substr(begin, end - begin));
}

// Fixed-width ascii field reader over an in-memory byte span.
struct FieldReader {
    std::string_view bytes;
    std::size_t pos = 0;

    std::string_view take(std::size_t n, const char* what) {
        if (pos + n > bytes.size())
            throw ParseError(std::string("file ends inside the ") + what + " field");
        std::string_view f = bytes.substr(pos, n);
        pos += n;
        return f;
    }
};

inline long long parse_int_field(std::string_view raw, const char* what) {
    const std::string t = trim(raw);
    if (t.empty()) throw ParseError(std::string(what) + " field is blank");
    long long v = 0;
    const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || p != t.data() + t.size())
        throw ParseError(std::string(what) + " field is not an integer: '" + t + "'");
    return v;
}

inline double parse_double_field(std::string_view raw, const char* what) {
    const std::string t = trim(raw);
    if (t.empty()) throw ParseError(std::string(what) + " field is blank");
    double v = 0.0;
    const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || p != t.data() + t.size())
        throw ParseError(std::string(what) + " field is not a number: '" + t + "'");
    return v;
}

inline void put_field(std::string& out, std::string_view value, std::size_t width,
                      const char* what) {
    if (value.size() > width)
        throw DomainError(std::string(what) + " '" + std::string(value) + "' exceeds " +
                          std::to_string(width) + " bytes");
    for (char c : value)
        if (static_cast<unsigned char>(c) < 32 || static_cast<unsigned char>(c) > 126)
            throw DomainError(std::string(what) + " contains non-printable bytes");
    out.append(value);
    out.append(width - value.size(), ' ');
}

inline std::string format_number(double v) {
    if (v == static_cast<long long>(v) && std::abs(v) < 1e15) {
        return std::to_string(static_cast<long long>(v));
    }
    std::ostringstream os;
    os.precision(7);
    os << v;
    return os.str();
}

} // namespace detail

inline constexpr std::size_t kEdfHeaderBytes = 256;      // fixed part
inline constexpr std::size_t kEdfSignalHeaderBytes = 256; // per signal

inline EdfFile parse_edf(std::string_view bytes) {
    if (bytes.size() < kEdfHeaderBytes)
        throw ParseError("file ends before the 256-byte header (" +
                         std::to_string(bytes.size()) + " bytes)");
    detail::FieldReader r{bytes};
    EdfFile file;
    EdfHeader& h = file.header;
    h.version = detail::rtrim(r.take(8, "version"));
    h.patient = detail::rtrim(r.take(80, "patient id"));
    h.recording = detail::rtrim(r.take(80, "recording id"));
    h.start_date = detail::rtrim(r.take(8, "start date"));
    h.start_time = detail::rtrim(r.take(8, "start time"));
    const long long header_bytes = detail::parse_int_field(r.take(8, "header bytes"), "header bytes");
    h.reserved = detail::rtrim(r.take(44, "header reserved"));
    const long long n_records = detail::parse_int_field(r.take(8, "record count"), "record count");
    h.record_duration_s =
        detail::parse_double_field(r.take(8, "record duration"), "record duration");
    const long long n_signals = detail::parse_int_field(r.take(4, "signal count"), "signal count");

    if (n_signals < 1 || n_signals > 9999)
        throw ParseError("signal count " + std::to_string(n_signals) + " outside [1, 9999]");
    if (n_records < 0)
        throw ParseError("record count " + std::to_string(n_records) + " is negative");
    if (!(h.record_duration_s > 0.0))
        throw ParseError("record duration must be positive, got " +
                         std::to_string(h.record_duration_s));
    const std::size_t ns = static_cast<std::size_t>(n_signals);
    const std::size_t expect_header = kEdfHeaderBytes + ns * kEdfSignalHeaderBytes;
    if (static_cast<std::size_t>(header_bytes) != expect_header)
        throw ParseError("header byte count " + std::to_string(header_bytes) +
                         " does not equal 256*(1+" + std::to_string(ns) + ") = " +
                         std::to_string(expect_header));
    if (bytes.size() < expect_header)
        throw ParseError("file ends inside the signal headers");
    h.header_bytes = expect_header;
    h.n_records = static_cast<std::size_t>(n_records);

    // Signal headers are column-grouped: all labels, then all transducers, ...
    h.signals.resize(ns);
    for (auto& s : h.signals) s.label = detail::rtrim(r.take(16, "signal label"));
    for (auto& s : h.signals) s.transducer = detail::rtrim(r.take(80, "transducer"));
    for (auto& s : h.signals) s.dimension = detail::rtrim(r.take(8, "dimension"));
    for (auto& s : h.signals)
        s.physical_min = detail::parse_double_field(r.take(8, "physical min"), "physical min");
    for (auto& s : h.signals)
        s.physical_max = detail::parse_double_field(r.take(8, "physical max"), "physical max");
    for (auto& s : h.signals) {
        const long long v = detail::parse_int_field(r.take(8, "digital min"), "digital min");
        if (v < -32768 || v > 32767) throw ParseError("digital min outside int16 range");
        s.digital_min = static_cast<int>(v);
    }
    for (auto& s : h.signals) {
        const long long v = detail::parse_int_field(r.take(8, "digital max"), "digital max");
        if (v < -32768 || v > 32767) throw ParseError("digital max outside int16 range");
        s.digital_max = static_cast<int>(v);
    }
    for (auto& s : h.signals) s.prefiltering = detail::rtrim(r.take(80, "prefiltering"));
    for (auto& s : h.signals) {
        const long long v =
            detail::parse_int_field(r.take(8, "samples per record"), "samples per record");
        if (v < 1 || v > 1000000)
            throw ParseError("samples per record " + std::to_string(v) + " outside [1, 1e6]");
        s.samples_per_record = static_cast<std::size_t>(v);
    }
    for (auto& s : h.signals) s.reserved = detail::rtrim(r.take(32, "signal reserved"));

    for (std::size_t i = 0; i < ns; ++i) {
        const EdfSignal& s = h.signals[i];
        if (s.digital_min == s.digital_max)
            throw ParseError("signal " + std::to_string(i) +
                             " has digital_min == digital_max (" +
                             std::to_string(s.digital_min) + ")");
        if (s.digital_min > s.digital_max)
            throw ParseError("signal " + std::to_string(i) + " has digital_min > digital_max");
        if (s.physical_min == s.physical_max)
            throw ParseError("signal " + std::to_string(i) +
                             " has physical_min == physical_max");
    }

    // Confirm the byte count before any data allocation.
    std::size_t record_samples = 0;
    for (const EdfSignal& s : h.signals) record_samples += s.samples_per_record;
    const std::size_t data_bytes = bytes.size() - expect_header;
    const std::size_t expect_data = 2 * h.n_records * record_samples;
    if (data_bytes < expect_data)
        throw ParseError("file promises " + std::to_string(h.n_records) +
                         " records but ends after " +
                         std::to_string(data_bytes / (2 * std::max<std::size_t>(record_samples, 1))) +
                         " complete records");
    if (data_bytes > expect_data)
        throw ParseError("file carries " + std::to_string(data_bytes - expect_data) +
                         " trailing bytes beyond the declared records");

    file.digital.resize(ns);
    for (std::size_t i = 0; i < ns; ++i)
        file.digital[i].reserve(h.n_records * h.signals[i].samples_per_record);
    const unsigned char* p = reinterpret_cast<const unsigned char*>(bytes.data()) + expect_header;
    for (std::size_t rec = 0; rec < h.n_records; ++rec) {
        for (std::size_t i = 0; i < ns; ++i) {
            for (std::size_t k = 0; k < h.signals[i].samples_per_record; ++k) {
                const std::uint16_t lo = *p++;
                const std::uint16_t hi = *p++;
                file.digital[i].push_back(
                    static_cast<std::int16_t>(static_cast<std::uint16_t>(lo | (hi << 8))));
            }
        }
    }
    return file;
}

inline std::string write_edf(const EdfFile& file) {
    const EdfHeader& h = file.header;
    const std::size_t ns = h.n_signals();
    if (ns < 1 || ns > 9999) throw DomainError("writer needs 1 to 9999 signals");
    if (file.digital.size() != ns)
        throw DomainError("digital data carries " + std::to_string(file.digital.size()) +
                          " signals, header declares " + std::to_string(ns));
    if (!(h.record_duration_s > 0.0)) throw DomainError("record duration must be positive");
    for (std::size_t i = 0; i < ns; ++i) {
        const EdfSignal& s = h.signals[i];
        if (s.samples_per_record < 1) throw DomainError("samples per record must be >= 1");
        if (s.digital_min >= s.digital_max)
            throw DomainError("digital_min must be below digital_max");
        if (s.physical_min == s.physical_max)
            throw DomainError("physical_min must differ from physical_max");
        if (file.digital[i].size() != h.n_records * s.samples_per_record)
            throw DomainError("signal " + std::to_string(i) + " holds " +
                              std::to_string(file.digital[i].size()) + " samples, expected " +
                              std::to_string(h.n_records * s.samples_per_record));
    }

    std::string out;
    const std::size_t header_bytes = kEdfHeaderBytes + ns * kEdfSignalHeaderBytes;
    detail::put_field(out, h.version, 8, "version");
    detail::put_field(out, h.patient, 80, "patient id");
    detail::put_field(out, h.recording, 80, "recording id");
    detail::put_field(out, h.start_date, 8, "start date");
    detail::put_field(out, h.start_time, 8, "start time");
    detail::put_field(out, std::to_string(header_bytes), 8, "header bytes");
    detail::put_field(out, h.reserved, 44, "header reserved");
    detail::put_field(out, std::to_string(h.n_records), 8, "record count");
    detail::put_field(out, detail::format_number(h.record_duration_s), 8, "record duration");
    detail::put_field(out, std::to_string(ns), 4, "signal count");
    for (const auto& s : h.signals) detail::put_field(out, s.label, 16, "signal label");
    for (const auto& s : h.signals) detail::put_field(out, s.transducer, 80, "transducer");
    for (const auto& s : h.signals) detail::put_field(out, s.dimension, 8, "dimension");
    for (const auto& s : h.signals)
        detail::put_field(out, detail::format_number(s.physical_min), 8, "physical min");
    for (const auto& s : h.signals)
        detail::put_field(out, detail::format_number(s.physical_max), 8, "physical max");
    for (const auto& s : h.signals)
        detail::put_field(out, std::to_string(s.digital_min), 8, "digital min");
    for (const auto& s : h.signals)
        detail::put_field(out, std::to_string(s.digital_max), 8, "digital max");
    for (const auto& s : h.signals) detail::put_field(out, s.prefiltering, 80, "prefiltering");
    for (const auto& s : h.signals)
        detail::put_field(out, std::to_string(s.samples_per_record), 8, "samples per record");
    for (const auto& s : h.signals) detail::put_field(out, s.reserved, 32, "signal reserved");

    for (std::size_t rec = 0; rec < h.n_records; ++rec) {
        for (std::size_t i = 0; i < ns; ++i) {
            const std::size_t spr = h.signals[i].samples_per_record;
            for (std::size_t k = 0; k < spr; ++k) {
                const auto v = static_cast<std::uint16_t>(file.digital[i][rec * spr + k]);
                out.push_back(static_cast<char>(v & 0xff));
                out.push_back(static_cast<char>((v >> 8) & 0xff));
            }
        }
    }
    return out;
}

inline EdfFile read_edf(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open EDF file: " + path);
    std::ostringstream buf;
    buf << is.rdbuf();
    return parse_edf(buf.str());
}

inline void write_edf(const std::string& path, const EdfFile& file) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open EDF file for writing: " + path);
    const std::string bytes = write_edf(file);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw IoError("EDF write failed: " + path);
}

// ---------------------------------------------------------------------------
// Channel extraction: one signal, segmented into non-overlapping epochs, the
// trailing partial epoch dropped. Sample rate = samples_per_record / duration.
// ---------------------------------------------------------------------------

inline Dataset extract_channel(const EdfFile& file, const std::string& channel_label,
                               double epoch_seconds = kEpochSeconds,
                               std::string source_id = "") {
    std::size_t sig = file.header.n_signals();
    std::string available;
    for (std::size_t i = 0; i < file.header.n_signals(); ++i) {
        if (file.header.signals[i].label == channel_label) {
            sig = i;
            break;
        }
        if (!available.empty()) available += ", ";
        available += "'" + file.header.signals[i].label + "'";
    }
    if (sig == file.header.n_signals())
        throw DomainError("no channel labeled '" + channel_label + "'; file has " + available);
    if (!(epoch_seconds > 0.0)) throw DomainError("epoch length must be positive");

    const EdfSignal& s = file.header.signals[sig];
    const double rate = static_cast<double>(s.samples_per_record) / file.header.record_duration_s;
    const auto spe = static_cast<std::size_t>(std::llround(epoch_seconds * rate));
    if (spe < 1) throw DomainError("epoch length shorter than one sample period");

    if (source_id.empty())
        source_id = file.header.recording.empty() ? "edf" : file.header.recording;
    const std::string subject = file.header.patient.empty() ? source_id : file.header.patient;

    const std::vector<double> samples = file.physical(sig);
    Dataset ds;
    ds.set_subject(source_id, subject);
    const std::size_t n_epochs = samples.size() / spe;
    for (std::size_t e = 0; e < n_epochs; ++e) {
        Epoch ep;
        ep.samples.assign(samples.begin() + static_cast<std::ptrdiff_t>(e * spe),
                          samples.begin() + static_cast<std::ptrdiff_t>((e + 1) * spe));
        ep.sample_rate_hz = rate;
        ep.source_id = source_id;
        ep.index_in_recording = e;
        ds.add(std::move(ep));
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Sidecar labels: CSV of epoch_index,stage_token with a configurable token
// map. A token mapped to nothing marks the epoch excluded (movement/unknown).
// ---------------------------------------------------------------------------

struct LabelMap {
    std::map<std::string, std::optional<SleepStage>> tokens;

    static LabelMap standard() {
        LabelMap m;
        m.tokens["W"] = SleepStage::W;
        m.tokens["N1"] = SleepStage::N1;
        m.tokens["N2"] = SleepStage::N2;
        m.tokens["N3"] = SleepStage::N3;
        m.tokens["N4"] = SleepStage::N3; // deep-sleep merge
        m.tokens["REM"] = SleepStage::REM;
        m.tokens["MOVEMENT"] = std::nullopt;
        m.tokens["UNKNOWN"] = std::nullopt;
        return m;
    }
};

struct LabelRow {
    std::size_t epoch_index = 0;
    std::optional<SleepStage> stage; // nullopt = excluded
};

using LabelFile = std::vector<LabelRow>;

inline LabelFile parse_label_csv(std::istream& is, const LabelMap& map = LabelMap::standard()) {
    LabelFile rows;
    std::string line;
    std::size_t line_no = 0;
    bool first_data = true;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string t = detail::trim(line);
        if (t.empty() || t[0] == '#') continue;
        if (first_data && t == "epoch_index,stage") {
            first_data = false;
            continue;
        }
        first_data = false;
        const std::size_t comma = t.find(',');
        if (comma == std::string::npos)
            throw ParseError("label line " + std::to_string(line_no) + " has no comma: '" + t +
                             "'");
        const std::string idx_text = detail::trim(t.substr(0, comma));
        const std::string token = detail::trim(t.substr(comma + 1));
        if (token.find(',') != std::string::npos)
            throw ParseError("label line " + std::to_string(line_no) + " has extra fields");
        long long idx = 0;
        const auto [p, ec] =
            std::from_chars(idx_text.data(), idx_text.data() + idx_text.size(), idx);
        if (ec != std::errc() || p != idx_text.data() + idx_text.size() || idx < 0)
            throw ParseError("label line " + std::to_string(line_no) +
                             " has a bad epoch index: '" + idx_text + "'");
        const auto it = map.tokens.find(token);
        if (it == map.tokens.end())
            throw ParseError("label line " + std::to_string(line_no) + " has unknown stage token '" +
                             token + "'");
        if (!rows.empty() && static_cast<std::size_t>(idx) <= rows.back().epoch_index)
            throw ParseError("label line " + std::to_string(line_no) +
                             ": epoch indices must be strictly increasing");
        rows.push_back({static_cast<std::size_t>(idx), it->second});
    }
    return rows;
}

inline LabelFile read_label_csv(const std::string& path,
                                const LabelMap& map = LabelMap::standard()) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open label file: " + path);
    return parse_label_csv(is, map);
}

// Keeps exactly the epochs that received a real stage; excluded and unlabeled
// epochs drop out.
inline Dataset attach_labels(const Dataset& ds, const LabelFile& labels) {
    for (const LabelRow& row : labels)
        if (row.epoch_index >= ds.size())
            throw DomainError("label references epoch " + std::to_string(row.epoch_index) +
                              " but the dataset has " + std::to_string(ds.size()) + " epochs");
    Dataset out;
    for (const auto& [rec, subj] : ds.subjects()) out.set_subject(rec, subj);
    for (const LabelRow& row : labels) {
        if (!row.stage) continue;
        Epoch e = ds.epochs()[row.epoch_index];
        e.label = row.stage;
        out.add(std::move(e));
    }
    return out;
}

// Optionally trims long wake stretches: keeps at most `keep_epochs` labeled-W
// epochs before the first and after the last non-W epoch. No-op when nothing
// but wake is present.
inline Dataset trim_wake_padding(const Dataset& ds, std::size_t keep_epochs = 60) {
    const auto& epochs = ds.epochs();
    std::size_t first = epochs.size(), last = 0;
    for (std::size_t i = 0; i < epochs.size(); ++i) {
        if (epochs[i].label && *epochs[i].label != SleepStage::W) {
            if (first == epochs.size()) first = i;
            last = i;
        }
    }
    if (first == epochs.size()) return ds;
    const std::size_t lo = first > keep_epochs ? first - keep_epochs : 0;
    const std::size_t hi = std::min(epochs.size(), last + keep_epochs + 1);
    Dataset out;
    for (const auto& [rec, subj] : ds.subjects()) out.set_subject(rec, subj);
    for (std::size_t i = lo; i < hi; ++i) out.add(epochs[i]);
    return out;
}

} // namespace priorcl
