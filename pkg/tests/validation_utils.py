from typing import Any, Dict, Type, Union

from typing_extensions import Literal, get_args, get_origin


def validate_response_headers(
    headers: Dict[str, Any], expected_headers: Dict[str, Any]
):
    """Validates that the request headers contain the expected headers."""
    for key, value in expected_headers.items():
        assert key in headers
        assert headers[key] == value


def validate_row(body: Dict[str, Any], row_type: Type):
    """Validates that a written JSON row conforms to the given TypedDict."""
    if not hasattr(row_type, "__annotations__"):
        origin = get_origin(row_type)
        if origin:
            assert isinstance(body, origin)
        elif row_type is not Any:
            assert isinstance(body, row_type)
        return

    for key, value_type in row_type.__annotations__.items():
        if key in body and body[key] is not None:
            origin = get_origin(value_type)
            args = get_args(value_type)

            if origin is Literal:
                assert (
                    body[key] in args
                ), f"Field '{key}' has value '{body[key]}' which is not in {args}"
            elif origin is Union:
                # Optional and mixed fields are not checked further
                pass
            elif hasattr(value_type, "__annotations__"):
                validate_row(body[key], value_type)
            elif origin:
                assert isinstance(
                    body[key], origin
                ), f"Field '{key}' has wrong type. Expected {origin}"
            elif value_type is float:
                assert isinstance(body[key], (int, float)), f"Field '{key}'"
            elif value_type is not Any:
                assert isinstance(
                    body[key], value_type
                ), f"Field '{key}' has wrong type. Expected {value_type}"
