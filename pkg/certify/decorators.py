import logging
from functools import wraps
from typing import Any, Callable
from django.core.management.base import CommandError
from django.http import Http404, JsonResponse

from rest_framework import status
from rest_framework.exceptions import ParseError, ValidationError, NotFound
from certify.exceptions import ComputationError, InputError, SerializerValidationError
from certify.constants import COMPUTATION_ERROR, INVALID_REQUEST

logger = logging.getLogger('mvcert')

# Exit codes of the management commands.
EXIT_COMPUTATION_FAILURE = 1
EXIT_USAGE_ERROR = 2


def view_set_error_handler(func: Callable) -> Callable:
    """
    Decorator function that wraps the original function/method to check to have reusable error handling and adds logging.
    Args:
        func (Callable): The function/method being decorated.
    Returns:
        Callable: The wrapped function/method or raises an error.
    """

    @wraps(func)
    def wrapper(*args, **kwargs) -> Any:
        """
        Wrapped function/method that centralizes error handling and logging.
        Args:
            *args: Positional arguments passed to the wrapped function/method.
            **kwargs: Keyword arguments passed to the wrapped function/method.
        Returns:
            JSONResponse: The response generated by the decorated function or an error response.
        """
        view_name = func.__qualname__
        logger.info("Executing view method: %s", view_name)

        try:
            result = func(*args, **kwargs)
            logger.info("Successfully executed %s.", view_name)
            return result
        except (InputError, ComputationError, ValidationError, NotFound, Http404) as e:
            # Let DRF render the exception with its own status code
            logger.error("Request rejected in %s: %s", view_name, getattr(e, "detail", e))
            raise e
        except ParseError as e:
            logger.error(f"[ParseError in {view_name}] {e}")
            return JsonResponse(
                {
                    "status": status.HTTP_400_BAD_REQUEST,
                    "error": {"code": INVALID_REQUEST, "message": "Malformed request body"},
                },
                status=status.HTTP_400_BAD_REQUEST,
            )
        except SerializerValidationError as e:
            logger.error(f"[SerializerValidationError in {view_name}] {e}")
            return _return_serializer_error_response(e)
        except Exception as e:
            logger.error(f"[General Exception in {view_name}] {str(e)}", exc_info=True)
            return JsonResponse(
                {
                    "status": status.HTTP_500_INTERNAL_SERVER_ERROR,
                    "error": {"code": COMPUTATION_ERROR, "message": "Something went wrong!"},
                },
                status=status.HTTP_500_INTERNAL_SERVER_ERROR,
            )

    return wrapper


def command_error_handler(func: Callable) -> Callable:
    """
    Decorator for management command handlers mapping failures onto exit codes.

    Usage and I/O problems exit with 2, computation-level failures with 1.

    Args:
        func (Callable): The ``handle`` method being decorated.
    Returns:
        Callable: The wrapped method; raises CommandError on failure.
    """

    @wraps(func)
    def wrapper(*args, **kwargs) -> Any:
        command_name = func.__qualname__
        logger.info("Executing command: %s", command_name)
        try:
            return func(*args, **kwargs)
        except CommandError:
            raise
        except SerializerValidationError as e:
            logger.error("[Invalid configuration in %s] %s", command_name, e)
            raise CommandError(f"invalid configuration: {e}", returncode=EXIT_USAGE_ERROR)
        except (InputError, OSError) as e:
            logger.error("[Usage error in %s] %s", command_name, e)
            raise CommandError(str(e), returncode=EXIT_USAGE_ERROR)
        except ComputationError as e:
            logger.error("[Computation error in %s] %s", command_name, e)
            raise CommandError(str(e), returncode=EXIT_COMPUTATION_FAILURE)

    return wrapper


def _return_serializer_error_response(exception: SerializerValidationError) -> JsonResponse:
    """
    Return the appropriate response for serializer errors.

    Args:
        exception: SerializerValidationError object

    Returns:
        JsonResponse: JSON response containing the error message.
    """
    logger.error(f"[SerializerValidationException] {str(exception)}")
    return JsonResponse(
        {"status": status.HTTP_400_BAD_REQUEST, "error": exception.errors}, status=status.HTTP_400_BAD_REQUEST
    )
