#pragma once

#include "amod/vector_index.hpp"

namespace amod::reference {

/// Serial brute force: every distance, full sort by (distance, id), truncate.
/// Kept as the oracle for the parallel kernels and as the benchmark baseline.
RetrievalResult retrieve_analogies(const VectorIndex& index, std::string_view query_id, std::size_t k,
                                   LabelFilter filter = LabelFilter::any);

}  // namespace amod::reference
