#pragma once

#include "mrcp/core.hpp"
#include "mrcp/epoching.hpp"

#include <filesystem>
#include <string>
#include <string_view>

namespace mrcp::io {

/// "EEGR" recording: u16 version, f64 fs, u32 channels, u64 samples,
/// length-prefixed labels, then channel-major float32 samples in µV.
std::string encode_recording(const Recording& r);
Recording decode_recording(std::string_view bytes);
void write_recording(const std::filesystem::path& path, const Recording& r);
Recording read_recording(const std::filesystem::path& path);

/// Event text: a "#rest,start,end" block, then "sample_index,label" rows.
std::string encode_events(const EventList& ev);
EventList decode_events(std::string_view text);
void write_events(const std::filesystem::path& path, const EventList& ev);
EventList read_events(const std::filesystem::path& path);

/// "EEGE" epoch set: header, labels as i64, float32 samples; carries the
/// fingerprint of the configuration that produced it.
std::string encode_epochs(const EpochSet& e, const std::string& fingerprint);
std::pair<EpochSet, std::string> decode_epochs(std::string_view bytes);
void write_epochs(const std::filesystem::path& path, const EpochSet& e, const std::string& fingerprint);
std::pair<EpochSet, std::string> read_epochs(const std::filesystem::path& path);

std::string encode_rejection(const epoching::RejectionReport& r);

void write_text(const std::filesystem::path& path, std::string_view text);
std::string read_text(const std::filesystem::path& path);

}  // namespace mrcp::io
