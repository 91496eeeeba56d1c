#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "edc2rag/backends.hpp"
#include "edc2rag/core.hpp"

namespace edc2rag {

struct RunOptions {
    PipelineConfig pipeline;
    std::string method = "edc2";        // edc2 | vanilla | chunk | edc2-avg | edc2-random
    std::string backend_kind = "mock";  // mock | remote
    ProviderConfig provider;
    std::filesystem::path templates_dir = "prompts";
    std::filesystem::path out_dir = "out";
    std::optional<std::filesystem::path> embeddings_file;
};

struct RunResult {
    int total_queries = 0;
    int failed_queries = 0;
    std::filesystem::path manifest_path;
};

/// Runs a dataset through the selected method and writes, under out_dir:
///   queries.jsonl        input snapshot (labels, golds, cells)
///   records/<id>.json    one result record per query
///   clusters/<id>.json   clustering, for the edc2* methods
///   report.csv/.txt      aggregate metric table
///   failures.jsonl       per-query errors, when any
///   manifest.json        config snapshot, input digests, result digests
/// Failed queries never abort the batch.
RunResult run_dataset(const std::filesystem::path& dataset_path, const RunOptions& options);

/// Hex FNV-1a digest of a file's bytes, as recorded in manifests.
std::string file_digest(const std::filesystem::path& path);

std::string sanitize_file_stem(const std::string& id);

}  // namespace edc2rag
