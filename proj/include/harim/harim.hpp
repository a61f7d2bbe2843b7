#pragma once

#include <harim/baseline_metrics.hpp>
#include <harim/correlation.hpp>
#include <harim/error.hpp>
#include <harim/harim_engine.hpp>
#include <harim/likelihood_store.hpp>
#include <harim/meta_eval.hpp>
#include <harim/version.hpp>
