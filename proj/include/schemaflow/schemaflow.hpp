#pragma once

#include "schemaflow/aggregate.hpp"
#include "schemaflow/document.hpp"
#include "schemaflow/eval.hpp"
#include "schemaflow/gateway.hpp"
#include "schemaflow/http.hpp"
#include "schemaflow/pipeline.hpp"
#include "schemaflow/rev.hpp"
#include "schemaflow/schema_generation.hpp"
#include "schemaflow/store.hpp"
