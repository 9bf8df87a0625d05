#pragma once

#include "netfdi/sensor_network.hpp"
#include "netfdi/system_model.hpp"

namespace netfdi {

struct ObservabilityReport {
    int dimension = 0;
    int rank = 0;
    bool observable = false;
    double smallest_retained_sv = 0.0;
    bool network_strongly_connected = true;  // prerequisite flag, see networked_observability
};

struct OutputBlocks {
    Matrix D_C;      // Nn x Nn, blockdiag(C_i^T C_i)
    Matrix D_C_bar;  // Nn x N,  blockdiag(C_i^T)
};

OutputBlocks build_output_blocks(const MeasurementModel& mm);

/// Rank of the stacked observability matrix [H; HF; ...; HF^{d-1}].
/// The stack is built incrementally with early exit once full rank is hit.
ObservabilityReport is_observable(const Matrix& F, const Matrix& H,
                                  double rel_tol = 1e-10);

ObservabilityReport networked_observability(const SensorNetwork& net,
                                            const SystemModel& sys,
                                            const MeasurementModel& mm);

Matrix kron(const Matrix& a, const Matrix& b);

}  // namespace netfdi
