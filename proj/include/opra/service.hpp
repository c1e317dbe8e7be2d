#pragma once

#include "opra/aggregation.hpp"
#include "opra/attention.hpp"
#include "opra/coc.hpp"
#include "opra/corpus.hpp"
#include "opra/layout.hpp"
#include "opra/prompting.hpp"
#include "opra/providers.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>

namespace httplib {
class Server;
}

namespace opra {

// --- Configuration ----------------------------------------------------------

/// Key-value settings. Every numeric constant defaults to the engine default.
struct ServiceConfig {
    std::filesystem::path dataset_store;
    std::filesystem::path template_store;
    std::filesystem::path instructions;
    std::filesystem::path layout_store;
    std::filesystem::path mock_script;

    std::string embed_provider = "reference";
    std::string embed_url;
    std::size_t embed_dim = 768;
    std::uint64_t embed_seed = 0x6f707261ULL;

    std::string llm_provider = "mock";
    std::string llm_url;
    std::size_t llm_max_tokens = 256;
    std::size_t llm_token_budget = 4096;

    PruneOptions prune;
    GravityParams gravity;
    TsneOptions tsne;
    std::size_t histogram_bins = 20;
    CloudOptions clouds;
    std::size_t reassess_parallelism = 4;
    Strategy strategy = Strategy::cot_cr;

    std::string host = "127.0.0.1";
    int port = 8080;
};

/// Parses "key = value" lines; '#' starts a comment. Unknown keys are errors.
/// Relative paths are resolved against `base_dir`.
ServiceConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {});
ServiceConfig load_config(const std::filesystem::path& path);

/// OPRA_EMBED_URL / OPRA_LLM_URL switch the provider to remote at that URL.
void apply_env_overrides(ServiceConfig& cfg);

std::unique_ptr<Embedder> make_embedder(const ServiceConfig& cfg);
std::unique_ptr<LanguageModel> make_language_model(const ServiceConfig& cfg);

// --- Workspace ------------------------------------------------------------

/// Error with an HTTP status for the service layer.
class HttpError : public Error {
public:
    HttpError(int status, const std::string& what) : Error(what), status_(status) {}
    int status() const noexcept { return status_; }

private:
    int status_;
};

struct FilterState {
    Concept concept_id = Concept::trust;
    double coc_min = 0.0;
    double coc_max = 1.0;

    /// Missing CoC is only in range when the range is the whole [0,1].
    bool contains(const SentenceRecord& r) const;
};

enum class JobStatus : std::uint8_t { queued, running, done, failed };
std::string_view job_status_name(JobStatus s);

struct JobHandle {
    std::int64_t id = 0;
    std::string kind = "reassess";
    JobStatus status = JobStatus::queued;
    std::size_t completed = 0;
    std::size_t total = 0;
    std::string error;
    std::optional<ReassessReport> report;
};

nlohmann::json to_json(const JobHandle& job);

/// Everything the service serves: dataset, templates, cached layout, stored
/// assessments and the re-assessment job queue. Reads take a shared lock,
/// mutations an exclusive one; jobs run one at a time on a worker thread.
class Workspace {
public:
    struct Parts {
        Dataset dataset;
        TemplatePool templates;
        std::shared_ptr<const LanguageModel> llm;
        ServiceConfig config;
        std::optional<Layout> layout;
    };

    explicit Workspace(Parts parts);
    ~Workspace();
    Workspace(const Workspace&) = delete;
    Workspace& operator=(const Workspace&) = delete;

    static std::unique_ptr<Workspace> from_config(const ServiceConfig& cfg);

    nlohmann::json get_layout(std::optional<Concept> requested, HistogramScale scale, std::optional<std::size_t> bins);
    nlohmann::json put_filter(const nlohmann::json& body);
    nlohmann::json get_filter() const;
    nlohmann::json get_table(const std::string& sort, bool descending, bool include_excluded) const;
    nlohmann::json post_exclude(const nlohmann::json& body);
    nlohmann::json get_clouds(Concept c, const std::vector<std::int64_t>& selected) const;
    nlohmann::json get_reasoning(std::int64_t sentence, Concept c, std::optional<std::size_t> generated) const;
    nlohmann::json get_template(Concept c, Strategy s, std::optional<std::int64_t> version) const;
    nlohmann::json post_template_edit(const nlohmann::json& body);
    nlohmann::json post_assess(const nlohmann::json& body);
    nlohmann::json post_reassess(const nlohmann::json& body);
    nlohmann::json get_job(std::int64_t id) const;

    /// Blocks until the job reaches a terminal state or the timeout passes.
    JobHandle wait_job(std::int64_t id, std::chrono::milliseconds timeout = std::chrono::seconds(60)) const;

    /// Snapshot copies for tests and the CLI.
    Dataset dataset() const;
    FilterState filter() const;
    std::vector<std::int64_t> filtered_ids() const;

private:
    struct Job {
        JobHandle handle;
        Concept concept_id = Concept::trust;
        Strategy strategy = Strategy::cot_cr;
        std::vector<std::int64_t> ids;
    };

    void worker_loop();
    void run_job(std::int64_t id);
    void persist_dataset_locked() const;
    void persist_templates_locked() const;
    const Layout& ensure_layout();
    std::vector<std::int64_t> filtered_ids_locked() const;
    void rescale_locked();

    mutable std::shared_mutex data_mutex_;
    Dataset dataset_;
    TemplatePool templates_;
    std::shared_ptr<const LanguageModel> llm_;
    ServiceConfig config_;
    std::optional<Layout> layout_;
    OctagonGeometry geometry_ = OctagonGeometry::standard();
    FilterState filter_;
    std::map<std::pair<std::int64_t, Concept>, AssessmentResult> assessments_;

    mutable std::mutex job_mutex_;
    mutable std::condition_variable job_cv_;
    std::map<std::int64_t, Job> jobs_;
    std::deque<std::int64_t> queue_;
    std::int64_t next_job_ = 1;
    bool stopping_ = false;
    std::thread worker_;
};

/// Installs every endpoint on `server`.
void register_routes(httplib::Server& server, Workspace& ws);

/// Blocks serving until the process is stopped.
void serve(Workspace& ws, const std::string& host, int port);

}  // namespace opra
