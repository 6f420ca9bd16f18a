"""
WSGI config for the mvcert certification service.

Serves the bound and optimization endpoints and the recorded-run API.
"""

import os

from django.core.wsgi import get_wsgi_application

os.environ.setdefault("DJANGO_SETTINGS_MODULE", "mvcert.settings")

application = get_wsgi_application()
