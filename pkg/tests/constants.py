AUTHORIZATION_HEADER = {
    "Authorization": "Bearer test-api-key",
}

JSON_CONTENT_TYPE_HEADER = {
    "Content-Type": "application/json",
}

AUTH_AND_JSON_CONTENT_HEADER = {
    **AUTHORIZATION_HEADER,
    **JSON_CONTENT_TYPE_HEADER,
}

SAMPLE_PROMPT = "Is there a dog?"

BALLOON_PROMPT = "How many balloons are in the image?"

# Per-policy accuracies of the augmented-evaluation fixture, as (correct, n)
POLICY_FIXTURE = {
    "hard": (748, 1000),
    "easy": (790, 1000),
    "short": (801, 1000),
    "long": (776, 1000),
    "rewrite": (812, 1000),
    "spell": (795, 1000),
    "append": (744, 1000),
}
