# -*- coding: utf-8 -*-
#
# Distributed under the terms of the BSD 3-clause new license.
# See LICENSE for more info.
"""This subpackage contains tests of the dif-saml project."""
