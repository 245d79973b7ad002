use serde_json::{json, Value};

fn id_param(name: &str) -> Value {
    json!({"name": name, "in": "path", "required": true, "schema": {"type": "string"}})
}

fn body(schema: &str) -> Value {
    json!({"required": true, "content": {"application/json": {"schema": {"$ref": format!("#/components/schemas/{schema}")}}}})
}

fn ok(status: &str, schema: &str) -> Value {
    json!({status: {"description": "ok", "content": {"application/json": {"schema": {"$ref": format!("#/components/schemas/{schema}")}}}}})
}

fn with_errors(mut responses: Value, codes: &[&str]) -> Value {
    let map = responses.as_object_mut().expect("object");
    for c in codes {
        map.insert(
            c.to_string(),
            json!({"description": "error", "content": {"application/json": {"schema": {"$ref": "#/components/schemas/Error"}}}}),
        );
    }
    responses
}

fn admin() -> Value {
    json!([{"adminToken": []}])
}

/// The document served at `/api/openapi.json`.
pub fn openapi_document() -> Value {
    let complexity_q = json!({"name": "complexity", "in": "query", "required": false,
        "schema": {"type": "string", "enum": ["simple", "moderate", "complex"]}});
    json!({
        "openapi": "3.0.3",
        "info": {"title": "arabiq", "version": env!("CARGO_PKG_VERSION")},
        "paths": {
            "/api/openapi.json": {"get": {"summary": "This document", "responses": {"200": {"description": "ok"}}}},
            "/api/profiles": {"get": {"summary": "Configured provider profiles",
                "responses": {"200": {"description": "ok", "content": {"application/json": {"schema": {"type": "array", "items": {"$ref": "#/components/schemas/Profile"}}}}}}}},
            "/api/sessions": {"post": {"summary": "Start an anonymous session",
                "requestBody": {"required": false, "content": {"application/json": {"schema": {"$ref": "#/components/schemas/NewSession"}}}},
                "responses": with_errors(ok("201", "Session"), &["400"])}},
            "/api/sessions/{id}/progress": {"get": {"summary": "Attempt counts for a session",
                "parameters": [id_param("id")],
                "responses": with_errors(ok("200", "Progress"), &["404"])}},
            "/api/images": {
                "get": {"summary": "List images", "parameters": [complexity_q.clone()],
                    "responses": with_errors(json!({"200": {"description": "ok", "content": {"application/json": {"schema": {"type": "array", "items": {"$ref": "#/components/schemas/ImageRecord"}}}}}}), &["400"])},
                "post": {"summary": "Add an image by URL or upload",
                    "requestBody": {"required": true, "content": {
                        "application/json": {"schema": {"$ref": "#/components/schemas/UrlImage"}},
                        "multipart/form-data": {"schema": {"type": "object", "required": ["file"], "properties": {
                            "file": {"type": "string", "format": "binary"},
                            "complexity": {"type": "string", "enum": ["simple", "moderate", "complex"]}}}}}},
                    "responses": with_errors(ok("201", "ImageRecord"), &["400", "409", "413"])}
            },
            "/api/images/random": {"get": {"summary": "A random stored image", "parameters": [complexity_q],
                "responses": with_errors(ok("200", "ImageRecord"), &["400", "404"])}},
            "/api/images/{id}": {"get": {"summary": "One image", "parameters": [id_param("id")],
                "responses": with_errors(ok("200", "ImageRecord"), &["404"])}},
            "/api/images/{id}/content": {"get": {"summary": "Image bytes, or a redirect for URL images",
                "parameters": [id_param("id")],
                "responses": with_errors(json!({"200": {"description": "image bytes"}, "307": {"description": "redirect to the source URL"}}), &["404"])}},
            "/api/images/{id}/quizset": {"post": {"summary": "Generate a quiz set for an image",
                "parameters": [id_param("id")], "requestBody": body("QuizSetRequest"),
                "responses": with_errors(ok("201", "LearnerQuizSet"), &["400", "404", "409", "502"])}},
            "/api/quizsets/{id}": {"get": {"summary": "Learner view of a stored quiz set",
                "parameters": [id_param("id")],
                "responses": with_errors(ok("200", "LearnerQuizSet"), &["404"])}},
            "/api/quizsets/{id}/random": {"get": {"summary": "One random question from a set",
                "parameters": [id_param("id"), {"name": "session_id", "in": "query", "required": false, "schema": {"type": "string"}}],
                "responses": with_errors(ok("200", "LearnerQuiz"), &["404"])}},
            "/api/quizzes/{id}/answer": {"post": {"summary": "Answer a question",
                "parameters": [id_param("id")], "requestBody": body("AnswerRequest"),
                "responses": with_errors(ok("200", "Feedback"), &["400", "404", "409", "422"])}},
            "/api/quizzes/{id}/full": {"get": {"summary": "Quiz with answer, lint report and description",
                "security": admin(), "parameters": [id_param("id")],
                "responses": with_errors(json!({"200": {"description": "ok"}}), &["401", "404"])}},
            "/api/reports": {"get": {"summary": "Report file names", "security": admin(),
                "responses": with_errors(json!({"200": {"description": "ok"}}), &["401"])}},
            "/api/reports/{name}": {"get": {"summary": "One report file", "security": admin(),
                "parameters": [id_param("name")],
                "responses": with_errors(json!({"200": {"description": "markdown, CSV or JSON"}}), &["400", "401", "404"])}}
        },
        "components": {
            "securitySchemes": {"adminToken": {"type": "apiKey", "in": "header", "name": "X-Admin-Token"}},
            "schemas": {
                "Error": {"type": "object", "required": ["error", "message"], "properties": {
                    "error": {"type": "string"}, "message": {"type": "string"}}},
                "Profile": {"type": "object", "properties": {
                    "profile_id": {"type": "string"}, "model_name": {"type": "string"},
                    "modality": {"type": "string", "enum": ["vision", "text", "mock"]}}},
                "NewSession": {"type": "object", "properties": {"native_language": {"type": "string"}}},
                "Session": {"type": "object", "properties": {
                    "session_id": {"type": "string"}, "native_language": {"type": "string"},
                    "created_at": {"type": "string", "format": "date-time"}}},
                "Progress": {"type": "object", "properties": {
                    "session_id": {"type": "string"}, "attempts": {"type": "integer"}, "correct": {"type": "integer"}}},
                "UrlImage": {"type": "object", "required": ["url"], "properties": {
                    "url": {"type": "string"},
                    "complexity": {"type": "string", "enum": ["simple", "moderate", "complex"]}}},
                "ImageRecord": {"type": "object", "properties": {
                    "id": {"type": "string"}, "source": {"type": "string", "enum": ["upload", "url"]},
                    "locator": {"type": "string"}, "sha256": {"type": "string"},
                    "complexity": {"type": "string", "enum": ["simple", "moderate", "complex"]},
                    "created_at": {"type": "string", "format": "date-time"}}},
                "QuizSetRequest": {"type": "object", "required": ["vision_profile", "quiz_profile"], "properties": {
                    "vision_profile": {"type": "string"}, "quiz_profile": {"type": "string"},
                    "condition": {"type": "string", "enum": ["prompted", "bare"], "default": "prompted"},
                    "n": {"type": "integer", "minimum": 1, "maximum": 10, "default": 2}}},
                "Option": {"type": "object", "properties": {
                    "label": {"type": "string", "enum": ["a", "b", "c", "d"]}, "text_ar": {"type": "string"}}},
                "LearnerQuiz": {"type": "object", "properties": {
                    "quiz_id": {"type": "string"}, "ordinal": {"type": "integer"}, "stem": {"type": "string"},
                    "skill": {"type": "string"},
                    "options": {"type": "array", "items": {"$ref": "#/components/schemas/Option"}}}},
                "LearnerQuizSet": {"type": "object", "properties": {
                    "quiz_set_id": {"type": "string"}, "image_id": {"type": "string"},
                    "quizzes": {"type": "array", "items": {"$ref": "#/components/schemas/LearnerQuiz"}}}},
                "AnswerRequest": {"type": "object", "required": ["session_id", "label"], "properties": {
                    "session_id": {"type": "string"}, "label": {"type": "string", "enum": ["a", "b", "c", "d"]}}},
                "Feedback": {"type": "object", "properties": {
                    "is_correct": {"type": "boolean"}, "correct_label": {"type": "string"},
                    "correct_text_ar": {"type": "string"},
                    "message_key": {"type": "string", "enum": ["correct", "incorrect_show_answer"]}}}
            }
        }
    })
}
