from glob import glob

from setuptools import setup

package_name = 'sip_privacy_gateway'

setup(
    name=package_name,
    version='0.1.0',
    packages=[package_name],
    data_files=[
        ('share/' + package_name + '/corpus', glob('resource/corpus/*.sip')),
        ('share/' + package_name + '/corpus', glob('resource/corpus/*.hex')),
        ('share/' + package_name + '/scenarios', glob('resource/scenarios/*.json')),
    ],
    install_requires=[
        'setuptools',
        'numpy',
        'cryptography'
    ],
    zip_safe=True,
    maintainer='Stacy',
    maintainer_email='catundertheleaf@gmail.com',
    description='User and network privacy functions for SIP, with a VoIP peering simulator '
                'that audits transcripts for identity leaks.',
    license='Apache License 2.0',
    tests_require=['pytest', 'hypothesis', 'flake8', 'pydocstyle'],
    entry_points={
        'console_scripts': [
            'spg = sip_privacy_gateway.cli:main'
        ],
    },
)
