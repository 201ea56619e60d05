# privreport package
