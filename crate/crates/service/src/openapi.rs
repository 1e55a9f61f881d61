use serde_json::{json, Value};

fn id_param() -> Value {
    json!({ "name": "id", "in": "path", "required": true, "schema": { "type": "string" } })
}

fn error_response(description: &str) -> Value {
    json!({
        "description": description,
        "content": { "application/json": { "schema": { "$ref": "#/components/schemas/Error" } } }
    })
}

fn json_body(schema: Value) -> Value {
    json!({ "required": true, "content": { "application/json": { "schema": schema } } })
}

fn ok(schema: Value) -> Value {
    json!({ "description": "OK", "content": { "application/json": { "schema": schema } } })
}

/// OpenAPI 3 description of the HTTP interface.
pub fn document() -> Value {
    let rows = json!({ "type": "array", "items": { "type": "array", "items": { "type": "number" } } });
    let rank_fields = json!({
        "L": { "type": "integer", "minimum": 1 },
        "rank": { "type": "integer", "minimum": 1 },
        "epsilon": { "type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1 }
    });
    json!({
        "openapi": "3.0.3",
        "info": {
            "title": "hankel-service",
            "version": hankel_core::VERSION,
            "description": "Sliding-window embeddings, subspace identification and Kalman forecasts over uploaded series. State coordinates refer to the min-max scaled series; forecast outputs are in original units."
        },
        "paths": {
            "/datasets": {
                "get": { "summary": "List dataset ids", "responses": { "200": ok(json!({ "type": "array", "items": { "type": "string" } })) } },
                "post": {
                    "summary": "Upload a CSV (raw body or multipart file field)",
                    "requestBody": { "required": true, "content": {
                        "text/csv": { "schema": { "type": "string" } },
                        "multipart/form-data": { "schema": { "type": "object", "properties": { "file": { "type": "string", "format": "binary" } } } }
                    } },
                    "responses": {
                        "201": ok(json!({ "$ref": "#/components/schemas/DatasetSummary" })),
                        "400": error_response("CSV could not be parsed")
                    }
                }
            },
            "/datasets/{id}": {
                "get": {
                    "summary": "Dataset values in original units",
                    "parameters": [id_param()],
                    "responses": { "200": ok(json!({ "type": "object" })), "404": error_response("unknown id") }
                }
            },
            "/datasets/{id}/embedding": {
                "get": {
                    "summary": "Window embedding with singular spectrum and cross-method alignment residual",
                    "parameters": [
                        id_param(),
                        { "name": "L", "in": "query", "required": true, "schema": { "type": "integer", "minimum": 1 } },
                        { "name": "rank", "in": "query", "schema": { "type": "integer", "minimum": 1 } },
                        { "name": "epsilon", "in": "query", "schema": { "type": "number" } },
                        { "name": "method", "in": "query", "schema": { "type": "string", "enum": ["timecluster", "subspace"], "default": "subspace" } },
                        { "name": "center", "in": "query", "schema": { "type": "boolean", "default": false } }
                    ],
                    "responses": {
                        "200": ok(json!({ "type": "object", "properties": {
                            "L": { "type": "integer" }, "r": { "type": "integer" },
                            "method": { "type": "string" }, "center": { "type": "boolean" },
                            "source": { "type": "string" },
                            "window_starts": { "type": "array", "items": { "type": "integer" } },
                            "coords": rows,
                            "singular_values": { "type": "array", "items": { "type": "number" } },
                            "align_residual": { "type": "number" }
                        } })),
                        "404": error_response("unknown id"),
                        "422": error_response("invalid parameters")
                    }
                }
            },
            "/datasets/{id}/selection": {
                "post": {
                    "summary": "Map window indices to time ranges, or a time range to intersecting windows",
                    "parameters": [id_param()],
                    "requestBody": json_body(json!({ "type": "object", "required": ["L"], "properties": {
                        "L": { "type": "integer" },
                        "window_indices": { "type": "array", "items": { "type": "integer" } },
                        "time_range": { "type": "array", "items": { "type": "integer" }, "minItems": 2, "maxItems": 2 }
                    } })),
                    "responses": {
                        "200": ok(json!({ "type": "object", "properties": {
                            "time_ranges": { "type": "array", "items": { "type": "array", "items": { "type": "integer" } } },
                            "window_indices": { "type": "array", "items": { "type": "integer" } }
                        } })),
                        "404": error_response("unknown id"),
                        "422": error_response("index or range out of bounds")
                    }
                }
            },
            "/datasets/{id}/forecast": {
                "post": {
                    "summary": "Kalman forecast h steps past the last sample",
                    "parameters": [id_param()],
                    "requestBody": json_body(json!({ "type": "object", "required": ["L", "h"],
                        "properties": merge(&rank_fields, json!({ "h": { "type": "integer", "minimum": 1 } })) })),
                    "responses": {
                        "200": ok(json!({ "type": "object", "properties": {
                            "horizon": { "type": "integer" }, "start": { "type": "integer" }, "n": { "type": "integer" },
                            "predicted_states": rows, "predicted_outputs": rows,
                            "output_covariances": { "type": "array", "items": rows }
                        } })),
                        "404": error_response("unknown id"),
                        "422": error_response("invalid parameters")
                    }
                }
            },
            "/datasets/{id}/region-query": {
                "post": {
                    "summary": "Steps until the forecast state first enters a region of the embedding",
                    "parameters": [id_param()],
                    "requestBody": json_body(json!({ "type": "object", "required": ["L", "region", "horizon"],
                        "properties": merge(&rank_fields, json!({
                            "horizon": { "type": "integer", "minimum": 1 },
                            "region": { "oneOf": [
                                { "type": "object", "required": ["center", "radius"], "properties": {
                                    "center": { "type": "array", "items": { "type": "number" } }, "radius": { "type": "number" } } },
                                { "type": "object", "required": ["min", "max"], "properties": {
                                    "min": { "type": "array", "items": { "type": "number" } },
                                    "max": { "type": "array", "items": { "type": "number" } } } }
                            ] }
                        })) })),
                    "responses": {
                        "200": ok(json!({ "type": "object", "properties": { "steps_until_entry": { "type": "integer", "nullable": true } } })),
                        "404": error_response("unknown id"),
                        "422": error_response("invalid parameters")
                    }
                }
            },
            "/spec": { "get": { "summary": "This document", "responses": { "200": ok(json!({ "type": "object" })) } } }
        },
        "components": { "schemas": {
            "Error": { "type": "object", "properties": { "error": { "type": "string" } } },
            "DatasetSummary": { "type": "object", "properties": {
                "id": { "type": "string" }, "T": { "type": "integer" }, "D": { "type": "integer" },
                "channel_names": { "type": "array", "items": { "type": "string" } }
            } }
        } }
    })
}

fn merge(a: &Value, b: Value) -> Value {
    let mut out = a.clone();
    if let (Some(o), Value::Object(extra)) = (out.as_object_mut(), b) {
        o.extend(extra);
    }
    out
}
