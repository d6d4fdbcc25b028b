#pragma once

#include "amod/mock_backend.hpp"
#include "amod/schema.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace amod {

/// Balanced synthetic corpus: category i gets n/k instances plus one of the
/// remainder when i < n%k. Texts start with "#<n> " and contain the category's
/// topic keyword, so scripted mocks can recognize both. Throws ConfigError when n < k.
std::vector<ModerationInstance> synth_corpus(std::size_t n, const LabelSchema& schema, std::uint64_t seed);

/// Keyword present in every synthetic text of `category`.
std::string topic_keyword(const LabelSchema& schema, const std::string& category);

/// Scripts that drive the whole pipeline offline against a synthetic corpus.
///   base:     chain-of-analogy chains echoing the first analogy, ending on the gold label
///   coa:      virtual analogies of the content's category
///   aux:      rule induction asserting the content's category; reasoning ending on the gold label
///   external: obeys injected rules; without a rule answers `fallback`
struct MockSuite {
    MockScript base;
    MockScript coa;
    MockScript aux;
    MockScript external;
};

MockSuite default_mock_suite(const LabelSchema& schema, const std::string& fallback = {});

/// Rule that makes the aux model assert `wrong` when inducing a rule for synthetic instance #n.
MockRule wrong_category_rule(std::size_t n, const std::string& wrong);

}  // namespace amod
