#pragma once

#include "ocsim/convnet.hpp"
#include "ocsim/link.hpp"
#include "ocsim/opu.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace ocsim::cluster {

enum class JobKind { Conv1d, Conv2d, Layer };

const char* job_kind_name(JobKind kind);
JobKind job_kind_from_name(const std::string& name);

// One request from an edge node. submit_time_ns is the arrival time at the
// computing-center queue; the fiber delay is accounted separately.
struct Job {
    std::uint64_t id = 0;
    int origin_edge = 0;
    JobKind kind = JobKind::Conv1d;
    Eigen::MatrixXd payload; // conv1d: 1 x W row, conv2d: image
    Eigen::MatrixXd kernel;  // conv1d: 1 x k, conv2d: K x K
    std::shared_ptr<const convnet::Conv2dLayer> layer; // layer jobs
    std::vector<Eigen::MatrixXd> layer_input;
    double submit_time_ns = 0.0;

    void validate() const;
};

// Homogeneous bank of processing units plus the wall power each unit draws
// while busy (for the per-job energy ledger).
struct OpuPool {
    std::vector<opu::OpuConfig> units;
    double unit_power_mw = 426.92;

    double slot_ns() const { return 1.0 / units.front().baud_ghz; }
    void validate() const;
};

// Gives every edge node its own data channel (a residue the weight page does
// not occupy). Throws CapacityError with the shortfall when the cycle has too
// few free residues.
std::vector<int> allocate_channels(const opu::WavelengthPlan& plan, int edge_count);

struct Placement {
    int job_index = 0;
    int task_index = 0;
    int unit = 0;
    long long start_slot = 0;
    long long duration_slots = 0;
    double ops = 0.0; // useful multiply-accumulate work in the task
};

struct Assignment {
    std::vector<Placement> placements;
    long long makespan_slots = 0;
};

// Deterministic FIFO-greedy: tasks in (submit time, job, task) order, each to
// the unit that can start it earliest, ties to the lowest unit id.
Assignment schedule(const std::vector<Job>& jobs, const OpuPool& pool);

struct JobResult {
    std::uint64_t job_id = 0;
    bool ok = true;
    std::string error;
    Eigen::MatrixXd output;                    // conv1d / conv2d
    std::vector<Eigen::MatrixXd> layer_output; // layer jobs
    double finish_ns = 0.0;
    double latency_ns = 0.0; // uplink + queue + compute + downlink
    double energy_mj = 0.0;
};

struct ClusterReport {
    double makespan_ns = 0.0;
    double total_ops = 0.0;
    double achieved_tops = 0.0;
    double energy_mj = 0.0;
    Eigen::ArrayXd utilization; // busy fraction per unit
};

struct RunOutput {
    Assignment assignment;
    std::vector<JobResult> jobs;
    ClusterReport report;
};

// Schedules and executes the batch. Results depend only on (jobs, pool
// configuration, seed), never on placement order.
RunOutput run_cluster(const std::vector<Job>& jobs, const OpuPool& pool,
                      const link::LinkModel& span, std::uint64_t seed);

} // namespace ocsim::cluster
